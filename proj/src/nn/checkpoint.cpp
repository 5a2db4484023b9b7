#include "qedgix/nn/checkpoint.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace qedgix::nn {

namespace {

constexpr const char* kMagic = "qedgix-checkpoint";

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

double parse_double(const std::string& token) {
  double v = 0.0;
  auto [end, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || end != token.data() + token.size())
    throw CheckpointError("checkpoint: malformed value '" + token + "'");
  return v;
}

}  // namespace

void Checkpoint::put(const std::string& ns, const ParameterList& params) {
  for (const Parameter* p : params) tensors[ns + "/" + p->id] = p->value;
}

void Checkpoint::restore(const std::string& ns, const ParameterList& params) const {
  for (Parameter* p : params) {
    const std::string key = ns + "/" + p->id;
    auto it = tensors.find(key);
    if (it == tensors.end()) throw CheckpointError("checkpoint: missing tensor '" + key + "'");
    if (it->second.shape() != p->value.shape())
      throw CheckpointError("checkpoint: tensor '" + key + "' has shape " + shape_string(it->second.shape()) +
                            ", expected " + shape_string(p->value.shape()));
    p->value = it->second;
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  std::ofstream out(path);
  if (!out) throw CheckpointError("checkpoint: cannot open '" + path.string() + "' for writing");
  out << kMagic << ' ' << Checkpoint::kFormatVersion << '\n';
  for (const auto& [key, value] : checkpoint.meta) {
    if (key.find_first_of(" \n") != std::string::npos || value.find('\n') != std::string::npos)
      throw CheckpointError("checkpoint: metadata '" + key + "' contains whitespace or newlines");
    out << "meta " << key << ' ' << value << '\n';
  }
  for (const auto& [key, tensor] : checkpoint.tensors) {
    out << "tensor " << key << ' ' << tensor.rank();
    for (auto d : tensor.shape()) out << ' ' << d;
    out << '\n';
    for (std::size_t i = 0; i < tensor.size(); ++i) out << (i ? " " : "") << format_double(tensor[i]);
    out << '\n';
  }
  if (!out) throw CheckpointError("checkpoint: write failed for '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CheckpointError("checkpoint: cannot open '" + path.string() + "'");
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != kMagic) throw CheckpointError("checkpoint: '" + path.string() + "' is not a checkpoint file");
  if (version != Checkpoint::kFormatVersion)
    throw CheckpointError("checkpoint: unsupported format version " + std::to_string(version));
  Checkpoint cp;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream head(line);
    std::string kind, key;
    head >> kind >> key;
    if (kind == "meta") {
      std::string value;
      std::getline(head >> std::ws, value);
      cp.meta[key] = value;
    } else if (kind == "tensor") {
      std::size_t rank = 0;
      head >> rank;
      Shape shape(rank);
      for (auto& d : shape) head >> d;
      if (!head) throw CheckpointError("checkpoint: malformed header for '" + key + "'");
      std::string body;
      if (!std::getline(in, body)) throw CheckpointError("checkpoint: truncated tensor '" + key + "'");
      std::istringstream values(body);
      std::vector<double> data;
      data.reserve(shape_size(shape));
      std::string token;
      while (values >> token) data.push_back(parse_double(token));
      if (data.size() != shape_size(shape))
        throw CheckpointError("checkpoint: tensor '" + key + "' value count does not match its shape");
      cp.tensors.emplace(key, Tensor(shape, std::move(data)));
    } else {
      throw CheckpointError("checkpoint: unknown record '" + kind + "'");
    }
  }
  return cp;
}

}  // namespace qedgix::nn
