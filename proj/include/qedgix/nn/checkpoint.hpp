#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>

#include "qedgix/nn/layers.hpp"

namespace qedgix::nn {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parameter id -> tensor map plus free-form string metadata. Stored as
/// line-oriented text:
///
///   qedgix-checkpoint 1
///   meta <key> <value>
///   tensor <id> <rank> <dims...>
///   <values, shortest round-trip decimal, space separated>
///
/// Values round-trip exactly.
struct Checkpoint {
  static constexpr int kFormatVersion = 1;

  std::map<std::string, std::string> meta;
  std::map<std::string, Tensor> tensors;

  /// Stores every parameter under "<ns>/<id>".
  void put(const std::string& ns, const ParameterList& params);
  /// Loads "<ns>/<id>" into each parameter; throws CheckpointError on a
  /// missing id or a shape difference.
  void restore(const std::string& ns, const ParameterList& params) const;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace qedgix::nn
