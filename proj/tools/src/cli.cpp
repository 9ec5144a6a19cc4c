#include "shadowlab_cli/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "shadowlab/dataio.hpp"
#include "shadowlab/error.hpp"
#include "shadowlab/metrics.hpp"
#include "shadowlab/model.hpp"
#include "shadowlab/parallel.hpp"
#include "shadowlab/random.hpp"
#include "shadowlab/ssgm.hpp"
#include "shadowlab/synth.hpp"
#include "shadowlab/verify.hpp"
#include "shadowlab_cli/config.hpp"

namespace fs = std::filesystem;

namespace shadowlab::cli {

namespace {

constexpr std::uint64_t kToyPageStream = 0x7a6e;
constexpr std::uint64_t kToyTemplateStream = 0x7e3b;

// Options every subcommand shares, plus flags that shadow config keys.
struct Common {
  std::string config_path;
  std::vector<std::string> assignments;
  std::vector<std::pair<std::string, std::optional<std::string>>> overrides;
  int threads = 1;
};

std::string key_footer(const std::vector<std::string>& prefixes) {
  std::string text = "\nConfiguration keys (--config FILE or --set KEY=VALUE; flag > file > default):\n";
  for (const auto& k : config_keys()) {
    const bool match = std::any_of(prefixes.begin(), prefixes.end(),
                                   [&](const std::string& p) { return k.name == p || k.name.rfind(p, 0) == 0; });
    if (!match) continue;
    text += "  " + k.name + " = " + (k.default_value.empty() ? "\"\"" : k.default_value) + "\n      " + k.help + "\n";
  }
  return text;
}

CLI::App* add_command(CLI::App& app, Common& c, const std::string& name, const std::string& desc,
                      const std::vector<std::string>& prefixes) {
  CLI::App* sub = app.add_subcommand(name, desc);
  sub->add_option("--config", c.config_path, "key=value configuration file")->check(CLI::ExistingFile);
  sub->add_option("--set", c.assignments, "override one configuration key, KEY=VALUE (repeatable)");
  sub->add_option("--threads", c.threads, "worker threads; never changes results")
      ->check(CLI::Range(1, 1024))
      ->capture_default_str();
  sub->footer(key_footer(prefixes));
  return sub;
}

// A flag that writes through to a configuration key when given.
void key_flag(CLI::App* sub, Common& c, const std::string& flag, const std::string& key, const std::string& desc) {
  c.overrides.emplace_back(key, std::nullopt);
  const std::size_t slot = c.overrides.size() - 1;
  std::string def;
  for (const auto& k : config_keys())
    if (k.name == key) def = k.default_value;
  sub->add_option_function<std::string>(
         flag, [&c, slot](const std::string& v) { c.overrides[slot].second = v; },
         desc + " (key " + key + ", default " + (def.empty() ? "\"\"" : def) + ")")
      ->type_name("VALUE");
}

CliConfig build_config(const Common& c) {
  CliConfig cfg;
  if (!c.config_path.empty()) cfg.load_file(c.config_path);
  for (const auto& a : c.assignments) cfg.set_assignment(a);
  for (const auto& [key, value] : c.overrides)
    if (value) cfg.set(key, *value);
  cfg.validate();
  return cfg;
}

std::vector<fs::path> png_files(const fs::path& p) {
  std::vector<fs::path> out;
  if (fs::is_directory(p)) {
    for (const auto& e : fs::directory_iterator(p))
      if (e.is_regular_file() && e.path().extension() == ".png") out.push_back(e.path());
    std::sort(out.begin(), out.end());
    if (out.empty()) throw IoError(p.string(), "no .png files in directory");
  } else {
    if (!fs::exists(p)) throw IoError(p.string(), "no such file");
    out.push_back(p);
  }
  return out;
}

std::vector<fs::path> collect(const std::vector<std::string>& inputs) {
  std::vector<fs::path> out;
  for (const auto& in : inputs) {
    auto files = png_files(in);
    out.insert(out.end(), files.begin(), files.end());
  }
  return out;
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

SoftMask mask_from_image(const Image& img) { return SoftMask(img.channels() == 1 ? img : to_gray(img)); }

void emit(const std::string& text, const std::string& out_path, std::ostream& out) {
  if (out_path.empty() || out_path == "-") {
    out << text;
  } else {
    ensure_parent(out_path);
    write_text_file(out_path, text);
  }
}

// ---------------------------------------------------------------- subcommands

int cmd_mask(const CliConfig& cfg, const std::string& in, const std::string& out_path) {
  const Image img = read_image(in);
  if (img.channels() != 3) throw InvalidInput("mask: expected an RGB image, got " + std::to_string(img.channels()) + " channels");
  const SoftMask mask = generate_soft_mask(img, cfg.ssgm());
  ensure_parent(out_path);
  write_image(out_path, mask.image());
  return kOk;
}

int cmd_synth(const CliConfig& cfg, const std::vector<std::string>& gt_in, const std::vector<std::string>& tpl_in,
              bool toy, const std::string& root, std::ostream& err) {
  const SynthConfig sc = cfg.synth();
  const auto count = static_cast<std::size_t>(cfg.get_int("synth.count"));
  std::vector<fs::path> gts, tpls;
  if (toy) {
    if (!gt_in.empty() || !tpl_in.empty()) throw InvalidInput("synth: --toy cannot be combined with --gt/--templates");
    const int n = static_cast<int>(cfg.get_int("synth.toy_sources"));
    const auto size_key = cfg.get_int("synth.toy_size");
    const int size = size_key > 0 ? static_cast<int>(size_key) : sc.output_size * 5 / 4;
    const fs::path src = fs::path(root) / "sources";
    fs::create_directories(src / "pages");
    fs::create_directories(src / "templates");
    for (int i = 0; i < n; ++i) {
      const auto idx = static_cast<std::uint64_t>(i);
      gts.push_back(src / "pages" / (format_id(static_cast<std::size_t>(i)) + ".png"));
      tpls.push_back(src / "templates" / (format_id(static_cast<std::size_t>(i)) + ".png"));
      write_image(gts.back(), make_toy_page(size, size, derive_seed(sc.seed, kToyPageStream, idx)));
      write_image(tpls.back(),
                  make_toy_shadow_template(size, size, derive_seed(sc.seed, kToyTemplateStream, idx)));
    }
  } else {
    if (gt_in.empty() || tpl_in.empty()) throw InvalidInput("synth: need --gt and --templates, or --toy");
    gts = collect(gt_in);
    tpls = collect(tpl_in);
  }
  fs::create_directories(root);
  const DatasetManifest m = generate_dataset_to_disk(gts, tpls, sc, count, root);
  const SplitCounts c = m.counts();
  err << "synth: " << m.records.size() << " samples (train " << c.train << ", valid " << c.valid << ", test "
      << c.test << ") in " << root << "\n";
  return kOk;
}

int cmd_hist(const CliConfig& cfg, const std::string& in, const std::string& out_path, std::ostream& out) {
  const Image img = read_image(in);
  if (img.channels() != 3) throw InvalidInput("hist: expected an RGB image");
  const auto hists = color_histogram(img, cfg.hist_bins());
  static const char* names[3] = {"h", "s", "v"};
  std::string text = "channel,bin,count\n";
  for (const auto& h : hists)
    for (int b = 0; b < h.bin_count(); ++b)
      text += std::string(names[h.channel]) + "," + std::to_string(b) + "," +
              std::to_string(h.counts[static_cast<std::size_t>(b)]) + "\n";
  emit(text, out_path, out);
  return kOk;
}

int cmd_train(const CliConfig& cfg, const std::string& data, const std::string& split, const std::string& ckpt,
              const std::string& log_path, std::ostream& err) {
  const TrainConfig tc = cfg.train();
  const SdeSchedule sched = cfg.schedule();
  const bool ssgm_masks = cfg.get("train.mask_source") == "ssgm";
  const SsgmConfig ssgm = cfg.ssgm();
  const DatasetManifest m = load_manifest(data);
  const auto records = m.in_split(parse_split(split));
  if (records.empty()) throw ValidationError("train: split '" + split + "' of " + data + " is empty");
  std::vector<TrainingSample> samples(records.size());
  parallel_for(records.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      LoadedSample ls = load_sample(data, *records[i]);
      SoftMask mask = ssgm_masks ? generate_soft_mask(ls.shadow, ssgm) : mask_from_image(ls.mask);
      samples[i] = TrainingSample{std::move(ls.shadow), std::move(ls.gt), std::move(mask)};
    }
  });

  ShadowModel model(cfg.model());
  Trainer trainer(model, sched, tc);
  const long log_every = static_cast<long>(cfg.get_int("train.log_every"));
  std::string log = "step,l_diff,l_fea,l_total\n";
  char line[160];
  trainer.train(samples, [&](int it, const LossReport& r) {
    std::snprintf(line, sizeof line, "%d,%.9g,%.9g,%.9g\n", it + 1, r.l_diff, r.l_fea, r.l_total);
    log += line;
    if (log_every > 0 && ((it + 1) % log_every == 0 || it == 0)) err << "train: step " << line;
  });
  ensure_parent(ckpt);
  save_checkpoint(ckpt, to_checkpoint(model, sched));
  if (!log_path.empty()) {
    ensure_parent(log_path);
    write_text_file(log_path, log);
  }
  return kOk;
}

int cmd_remove(const CliConfig& cfg, const std::string& ckpt_path, const std::string& in,
               const std::string& mask_in, const std::string& out_path) {
  SdeSchedule sched;
  const ShadowModel model = model_from_checkpoint(load_checkpoint(ckpt_path), &sched);
  RemoveConfig rc;
  rc.polarity = cfg.polarity();
  rc.reverse_mode = cfg.reverse_mode();
  rc.ssgm = cfg.ssgm();
  rc.seed = cfg.seed();
  rc.samples = cfg.remove_samples();

  const bool batch = fs::is_directory(in);
  const auto inputs = png_files(in);
  std::vector<fs::path> masks;
  if (!mask_in.empty()) {
    if (batch != fs::is_directory(mask_in)) throw InvalidInput("remove: --mask must match --in (file or directory)");
    for (const auto& p : inputs) masks.push_back(batch ? fs::path(mask_in) / p.filename() : fs::path(mask_in));
  }
  if (batch) fs::create_directories(out_path);
  parallel_for(inputs.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const Image shadow = read_image(inputs[i]);
      const Image clean = masks.empty() ? remove_shadow(shadow, model, sched, rc)
                                        : remove_shadow(shadow, mask_from_image(read_image(masks[i])), model, sched, rc);
      const fs::path dst = batch ? fs::path(out_path) / inputs[i].filename() : fs::path(out_path);
      if (!batch) ensure_parent(dst);
      write_image(dst, clean);
    }
  });
  return kOk;
}

int cmd_eval(const std::string& pred, const std::string& gt, const std::string& out_path, std::ostream& out) {
  emit(evaluate_dataset(pred, gt).to_csv(), out_path, out);
  return kOk;
}

int cmd_verify(const CliConfig& cfg, const std::string& out_path, std::ostream& out) {
  const SdeVerifyReport report = verify_sde(cfg.verify());
  emit(report.to_text(), out_path, out);
  return report.passed() ? kOk : kRuntime;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"shadowlab: document shadow-removal laboratory"};
  app.name(args.empty() ? "shadowlab" : fs::path(args[0]).filename().string());
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "show help for every subcommand");

  Common c;
  std::string in, out_path, mask_in, data, split = "train", ckpt, log_path, pred, gt;
  std::vector<std::string> gt_in, tpl_in;
  bool toy = false;

  CLI::App* mask = add_command(app, c, "mask", "estimate a soft shadow mask (8-bit grayscale PNG)", {"seed", "ssgm."});
  mask->add_option("--in", in, "shadow image (RGB PNG)")->required();
  mask->add_option("--out", out_path, "output mask PNG")->required();
  key_flag(mask, c, "--dark-fraction", "ssgm.dark_fraction", "fraction of darkest pixels");

  CLI::App* synth = add_command(app, c, "synth", "generate a synthetic shadow dataset with a 12:3:1 split",
                                {"seed", "synth."});
  synth->add_option("--gt", gt_in, "shadow-free page PNGs or directories");
  synth->add_option("--templates", tpl_in, "shadow template PNGs or directories");
  synth->add_flag("--toy", toy, "use procedural pages and templates (written to OUT/sources)");
  synth->add_option("--out", out_path, "dataset root")->required();
  key_flag(synth, c, "--seed", "seed", "master seed");
  key_flag(synth, c, "--count", "synth.count", "number of samples");
  key_flag(synth, c, "--size", "synth.output_size", "output side in pixels");
  key_flag(synth, c, "--mode", "synth.mode", "literal|attenuated");

  CLI::App* hist = add_command(app, c, "hist", "HSV colour histogram as CSV rows channel,bin,count", {"hist."});
  hist->add_option("--in", in, "RGB PNG")->required();
  hist->add_option("--out", out_path, "CSV file (default standard output)");
  key_flag(hist, c, "--bins", "hist.bins", "bins per channel");

  CLI::App* train = add_command(app, c, "train", "train the codec and denoiser on a dataset split",
                                {"seed", "sde.", "model.", "train.", "ssgm."});
  train->add_option("--data", data, "dataset root containing manifest.json")->required();
  train->add_option("--split", split, "split to train on")->capture_default_str();
  train->add_option("--out", ckpt, "checkpoint path")->required();
  train->add_option("--log", log_path, "per-step loss CSV");
  key_flag(train, c, "--seed", "seed", "master seed");
  key_flag(train, c, "--iterations", "train.iterations", "denoiser steps");

  CLI::App* remove = add_command(app, c, "remove", "remove shadows with a trained checkpoint",
                                 {"seed", "sde.polarity", "sde.reverse_mode", "remove.", "ssgm."});
  remove->add_option("--checkpoint", ckpt, "checkpoint from train")->required()->check(CLI::ExistingFile);
  remove->add_option("--in", in, "shadow PNG or directory of PNGs")->required();
  remove->add_option("--mask", mask_in, "soft-mask PNG or directory (default: estimated)");
  remove->add_option("--out", out_path, "output PNG or directory")->required();
  key_flag(remove, c, "--seed", "seed", "sampling seed");
  key_flag(remove, c, "--reverse-mode", "sde.reverse_mode", "stochastic|probability-flow");
  key_flag(remove, c, "--samples", "remove.samples", "stochastic runs averaged per image");

  CLI::App* eval = add_command(app, c, "eval", "PSNR/SSIM/RMSE (RGB and Y) over PNGs paired by name", {});
  eval->add_option("--pred", pred, "directory of predictions")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--gt", gt, "directory of references")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--out", out_path, "CSV file (default standard output)");

  CLI::App* verify = add_command(app, c, "verify-sde", "Monte-Carlo marginal and oracle-recovery checks of the SDE",
                                 {"seed", "sde.", "verify."});
  verify->add_option("--out", out_path, "report file (default standard output)");
  key_flag(verify, c, "--seed", "seed", "master seed");
  key_flag(verify, c, "--paths", "verify.paths", "Monte-Carlo paths");

  std::vector<std::string> rev(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
  std::reverse(rev.begin(), rev.end());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << app.get_name() << ": " << e.what() << "\n";
    err << "run '" << app.get_name() << " --help' for usage\n";
    return kUsage;
  }

  try {
    const CliConfig cfg = build_config(c);
    set_worker_threads(c.threads);
    if (mask->parsed()) return cmd_mask(cfg, in, out_path);
    if (synth->parsed()) return cmd_synth(cfg, gt_in, tpl_in, toy, out_path, err);
    if (hist->parsed()) return cmd_hist(cfg, in, out_path, out);
    if (train->parsed()) return cmd_train(cfg, data, split, ckpt, log_path, err);
    if (remove->parsed()) return cmd_remove(cfg, ckpt, in, mask_in, out_path);
    if (eval->parsed()) return cmd_eval(pred, gt, out_path, out);
    if (verify->parsed()) return cmd_verify(cfg, out_path, out);
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << "\n";
    return kValidation;
  } catch (const InvalidInput& e) {
    err << "invalid input: " << e.what() << "\n";
    return kValidation;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << "\n";
    return kRuntime;
  } catch (const NumericalDivergence& e) {
    err << "numerical error: " << e.what() << "\n";
    return kRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace shadowlab::cli
