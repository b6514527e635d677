#include "afa/trainer/checkpoint.hpp"

#include <cstdio>
#include <json.hpp>

#include "afa/diffkernel/tensor_io.hpp"
#include "afa/seqmodel/model.hpp"

namespace afa {
namespace {

std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

nlohmann::json config_json(const ModelConfig& cfg) {
  return {{"d", cfg.d},
          {"c", cfg.c},
          {"kind", to_string(cfg.kind)},
          {"model_dim", cfg.model_dim},
          {"hidden", cfg.hidden},
          {"layers", cfg.layers},
          {"heads", cfg.heads},
          {"embedding_depth", cfg.embedding_depth},
          {"dropout", cfg.dropout}};
}

ModelConfig config_from(const nlohmann::json& j) {
  ModelConfig cfg;
  cfg.d = j.at("d").get<std::size_t>();
  cfg.c = j.at("c").get<std::size_t>();
  cfg.kind = task_kind_from_string(j.at("kind").get<std::string>());
  cfg.model_dim = j.at("model_dim").get<std::size_t>();
  cfg.hidden = j.at("hidden").get<std::size_t>();
  cfg.layers = j.at("layers").get<std::size_t>();
  cfg.heads = j.at("heads").get<std::size_t>();
  cfg.embedding_depth = j.at("embedding_depth").get<std::size_t>();
  cfg.dropout = j.value("dropout", 0.0);
  cfg.validate();
  return cfg;
}

}  // namespace

std::string model_config_to_json(const ModelConfig& cfg) { return config_json(cfg).dump(); }

ModelConfig model_config_from_json(const std::string& text) {
  try {
    return config_from(nlohmann::json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model config json: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params, const CheckpointMeta& meta) {
  save_tensors(path, to_named(params));
  nlohmann::json j{{"format_version", kTensorFormatVersion},
                   {"model", config_json(meta.model)},
                   {"config_hash", hex64(config_hash(meta.model))},
                   {"stage", meta.stage},
                   {"step", meta.step},
                   {"val_loss", meta.val_loss}};
  auto side = path;
  side += ".json";
  write_file_atomic(side, j.dump(2) + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig* expected) {
  auto side = path;
  side += ".json";
  Checkpoint ck;
  try {
    const auto j = nlohmann::json::parse(read_file(side));
    ck.meta.model = config_from(j.at("model"));
    const std::string stored = j.at("config_hash").get<std::string>();
    if (stored != hex64(config_hash(ck.meta.model)))
      throw FormatError("checkpoint " + path.string() + ": config hash " + stored + " does not match its model config");
    ck.meta.config_hash = config_hash(ck.meta.model);
    ck.meta.stage = j.at("stage").get<std::string>();
    ck.meta.step = j.at("step").get<std::size_t>();
    ck.meta.val_loss = j.at("val_loss").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("checkpoint metadata " + side.string() + ": " + e.what());
  }
  if (expected && config_hash(*expected) != ck.meta.config_hash)
    throw FormatError("checkpoint " + path.string() + ": config hash mismatch (stored " + hex64(ck.meta.config_hash) +
                      ", expected " + hex64(config_hash(*expected)) + ")");

  Rng rng(0);
  ck.params = init_model_params(ck.meta.model, rng);
  const NamedTensors tensors = load_tensors(path);
  if (tensors.size() != ck.params.size())
    throw FormatError("checkpoint " + path.string() + ": expected " + std::to_string(ck.params.size()) +
                      " tensors, found " + std::to_string(tensors.size()));
  for (const auto& [name, t] : tensors) {
    if (!ck.params.contains(name)) throw FormatError("checkpoint " + path.string() + ": unexpected tensor '" + name + "'");
    Tensor& dst = ck.params.get(name);
    if (dst.shape() != t.shape()) throw FormatError("checkpoint " + path.string() + ": shape mismatch for '" + name + "'");
    dst = t;
  }
  return ck;
}

}  // namespace afa
