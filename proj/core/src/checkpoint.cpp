#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "shadowlab/error.hpp"
#include "shadowlab/model.hpp"

namespace shadowlab {

namespace fs = std::filesystem;

namespace {

void put_le(std::ostream& os, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xffU);
  os.write(buf, 8);
}

double get_le(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

bool valid_token(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s)
    if (c <= ' ' || c == 0x7f) return false;
  return true;
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

const std::string& meta_at(const Checkpoint& c, const std::string& key) {
  auto it = c.meta.find(key);
  if (it == c.meta.end()) throw ValidationError("checkpoint: missing meta key " + key);
  return it->second;
}

int meta_int(const Checkpoint& c, const std::string& key) {
  const std::string& v = meta_at(c, key);
  try {
    std::size_t pos = 0;
    const int out = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ValidationError("checkpoint: meta " + key + " is not an integer: " + v);
  }
}

double meta_double(const Checkpoint& c, const std::string& key) {
  const std::string& v = meta_at(c, key);
  try {
    std::size_t pos = 0;
    const double out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ValidationError("checkpoint: meta " + key + " is not a number: " + v);
  }
}

}  // namespace

void save_checkpoint(const fs::path& path, const Checkpoint& ckpt) {
  std::ostringstream head;
  head << Checkpoint::kMagic << ' ' << Checkpoint::kVersion << '\n';
  for (const auto& [k, v] : ckpt.meta) {
    if (!valid_token(k) || !valid_token(v)) throw InvalidInput("checkpoint: meta entries must be non-empty tokens");
    head << "meta " << k << ' ' << v << '\n';
  }
  std::size_t total = 0;
  for (const auto& [name, t] : ckpt.tensors) {
    if (!valid_token(name)) throw InvalidInput("checkpoint: bad tensor name '" + name + "'");
    head << "tensor " << name << ' ' << t.rank();
    for (int d : t.shape()) head << ' ' << d;
    head << '\n';
    total += t.size();
  }
  head << "data " << total << '\n';

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError(path.string(), "cannot open for writing");
  const std::string h = head.str();
  os.write(h.data(), static_cast<std::streamsize>(h.size()));
  for (const auto& [name, t] : ckpt.tensors)
    for (double v : t.values()) put_le(os, v);
  if (!os) throw IoError(path.string(), "write failed");
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError(path.string(), "cannot open checkpoint");
  auto fail = [&](const std::string& what) -> ValidationError {
    return ValidationError("checkpoint " + path.string() + ": " + what);
  };

  std::string line;
  if (!std::getline(is, line)) throw fail("empty file");
  {
    std::istringstream ls(line);
    std::string magic;
    int version = 0;
    if (!(ls >> magic >> version) || magic != Checkpoint::kMagic) throw fail("not a shadowlab checkpoint");
    if (version != Checkpoint::kVersion) throw fail("unsupported version " + std::to_string(version));
  }

  Checkpoint ckpt;
  std::size_t declared = 0;
  bool have_data = false;
  while (!have_data && std::getline(is, line)) {
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "meta") {
      std::string k, v;
      if (!(ls >> k >> v)) throw fail("malformed meta line");
      ckpt.meta[k] = v;
    } else if (kind == "tensor") {
      std::string name;
      std::size_t rank = 0;
      if (!(ls >> name >> rank) || rank == 0 || rank > 8) throw fail("malformed tensor line");
      std::vector<int> shape(rank);
      for (auto& d : shape)
        if (!(ls >> d) || d < 1) throw fail("bad shape for tensor " + name);
      ckpt.tensors.emplace_back(name, Tensor(shape));
    } else if (kind == "data") {
      if (!(ls >> declared)) throw fail("malformed data line");
      have_data = true;
    } else {
      throw fail("unexpected header line '" + line + "'");
    }
  }
  if (!have_data) throw fail("missing data section");
  std::size_t total = 0;
  for (const auto& [n, t] : ckpt.tensors) total += t.size();
  if (total != declared) throw fail("data count does not match tensor shapes");

  std::vector<unsigned char> bytes(total * 8);
  is.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(is.gcount()) != bytes.size()) throw fail("truncated data");
  if (is.peek() != std::char_traits<char>::eof()) throw fail("trailing bytes after data");
  std::size_t off = 0;
  for (auto& [n, t] : ckpt.tensors)
    for (double& v : t.values()) {
      v = get_le(bytes.data() + off);
      off += 8;
    }
  return ckpt;
}

Checkpoint to_checkpoint(const ShadowModel& model, const SdeSchedule& sched) {
  Checkpoint c;
  const ModelConfig& m = model.config;
  c.meta["model.image_channels"] = std::to_string(m.image_channels);
  c.meta["model.codec_hidden"] = std::to_string(m.codec_hidden);
  c.meta["model.latent_channels"] = std::to_string(m.latent_channels);
  c.meta["model.width"] = std::to_string(m.width);
  c.meta["model.blocks"] = std::to_string(m.blocks);
  c.meta["model.time_dim"] = std::to_string(m.time_dim);
  c.meta["sde.dt"] = fmt_double(sched.dt);
  c.meta["sde.terminal_noise_level"] = fmt_double(sched.terminal_noise_level);
  for (const nn::Parameter* p : model.parameters()) c.tensors.emplace_back(p->name, p->value);
  c.tensors.emplace_back("sde.theta", Tensor({sched.steps()}, sched.theta));
  c.tensors.emplace_back("sde.sigma", Tensor({sched.steps()}, sched.sigma));
  return c;
}

ShadowModel model_from_checkpoint(const Checkpoint& ckpt, SdeSchedule* sched) {
  ModelConfig cfg;
  cfg.image_channels = meta_int(ckpt, "model.image_channels");
  cfg.codec_hidden = meta_int(ckpt, "model.codec_hidden");
  cfg.latent_channels = meta_int(ckpt, "model.latent_channels");
  cfg.width = meta_int(ckpt, "model.width");
  cfg.blocks = meta_int(ckpt, "model.blocks");
  cfg.time_dim = meta_int(ckpt, "model.time_dim");
  ShadowModel model(cfg);

  std::map<std::string, const Tensor*> by_name;
  for (const auto& [n, t] : ckpt.tensors) by_name[n] = &t;
  for (nn::Parameter* p : model.parameters()) {
    auto it = by_name.find(p->name);
    if (it == by_name.end()) throw ValidationError("checkpoint: missing tensor " + p->name);
    if (it->second->shape() != p->value.shape()) {
      throw ValidationError("checkpoint: tensor " + p->name + " has shape " + shape_string(it->second->shape()) +
                            ", expected " + shape_string(p->value.shape()));
    }
    p->value = *it->second;
  }
  if (sched) {
    auto th = by_name.find("sde.theta");
    auto sg = by_name.find("sde.sigma");
    if (th == by_name.end() || sg == by_name.end()) throw ValidationError("checkpoint: missing SDE schedule");
    SdeSchedule s;
    s.theta = th->second->storage();
    s.sigma = sg->second->storage();
    s.dt = meta_double(ckpt, "sde.dt");
    s.terminal_noise_level = meta_double(ckpt, "sde.terminal_noise_level");
    s.validate();
    *sched = std::move(s);
  }
  return model;
}

}  // namespace shadowlab
