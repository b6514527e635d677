#include "afa/seqmodel/config.hpp"

#include <stdexcept>

#include "afa/diffkernel/tensor_io.hpp"
#include "afa/taskgen/dataset_io.hpp"

namespace afa {

void ModelConfig::validate() const {
  auto fail = [](const char* what) { throw std::invalid_argument(std::string("model config: ") + what); };
  if (d == 0) fail("d must be positive");
  if (kind == TaskKind::kRegression && c != 1) fail("regression requires c = 1");
  if (kind == TaskKind::kClassification && c < 2) fail("classification requires c >= 2");
  if (model_dim == 0 || hidden == 0 || layers == 0 || heads == 0 || embedding_depth == 0) fail("sizes must be positive");
  if (model_dim % heads != 0) fail("model_dim must be divisible by heads");
  if (dropout != 0.0) fail("dropout must be 0 (not implemented)");
}

std::string ModelConfig::canonical() const {
  return "d=" + std::to_string(d) + ";c=" + std::to_string(c) + ";kind=" + to_string(kind) +
         ";model_dim=" + std::to_string(model_dim) + ";hidden=" + std::to_string(hidden) +
         ";layers=" + std::to_string(layers) + ";heads=" + std::to_string(heads) +
         ";embedding_depth=" + std::to_string(embedding_depth) + ";dropout=" + format_double(dropout);
}

std::uint64_t config_hash(const ModelConfig& cfg) {
  const std::string s = cfg.canonical();
  return fnv1a64(s.data(), s.size());
}

}  // namespace afa
