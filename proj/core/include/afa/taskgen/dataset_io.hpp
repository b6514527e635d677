#pragma once

#include <filesystem>
#include <string>

#include "afa/diffkernel/tensor_io.hpp"
#include "afa/taskgen/dataset.hpp"

namespace afa {

// Lossless binary form on the named-tensor container.
NamedTensors dataset_to_tensors(const Dataset& ds);
Dataset dataset_from_tensors(const NamedTensors& tensors);
void save_dataset(const std::filesystem::path& path, const Dataset& ds);
Dataset load_dataset(const std::filesystem::path& path);

// CSV with a leading "# kind=... classes=... baseline=..." line, then header
//   x1..xd, r1..rd, y, x1_true..xd_true
// x_j is empty where r_j = 0. For classification y is the class index.
// Doubles are written in shortest round-trip form.
std::string dataset_to_csv(const Dataset& ds);
Dataset dataset_from_csv(const std::string& text);

std::string format_double(double v);

}  // namespace afa
