#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "afa/diffkernel/params.hpp"
#include "afa/seqmodel/config.hpp"

namespace afa {

struct CheckpointMeta {
  ModelConfig model;
  std::uint64_t config_hash = 0;
  std::string stage;  // "predictor" or "policy"
  std::size_t step = 0;
  double val_loss = 0.0;
};

std::string model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const std::string& text);

// Writes `<path>` (named-tensor container) and `<path>.json` (meta).
void save_checkpoint(const std::filesystem::path& path, const ParamStore& params, const CheckpointMeta& meta);

struct Checkpoint {
  ParamStore params;
  CheckpointMeta meta;
};

// Throws FormatError on a corrupt file, or when the stored config hash does
// not match the stored config or `expected` (when given).
Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig* expected = nullptr);

}  // namespace afa
