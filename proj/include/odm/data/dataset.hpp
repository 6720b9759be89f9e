#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "odm/image.hpp"
#include "odm/nn/tensor.hpp"

namespace odm::data {

// Labeled image set. Images share one shape within a dataset.
struct Dataset {
  std::vector<Image> images;
  std::vector<int> labels;
  std::vector<std::string> ids;
  std::vector<std::string> class_names;

  std::size_t size() const { return images.size(); }
  int num_classes() const;
  void push(Image im, int label, std::string id);
};

// Directory layout: one subdirectory per class, lossless PNG files inside.
// Class indices follow the sorted subdirectory names.
Dataset load_directory(const std::filesystem::path& root);

// Manifest: JSON lines of {"path": ..., "label": ...}; paths are resolved
// relative to the manifest location. Optional "class_names" line.
Dataset load_manifest(const std::filesystem::path& manifest);

void save_directory(const Dataset& ds, const std::filesystem::path& root,
                    const std::string& config_digest = "");

Dataset subset(const Dataset& ds, std::span<const std::size_t> indices);

// [N,H,W,C] batch tensor from a contiguous image range.
nn::Tensor batch_tensor(const Dataset& ds, std::span<const std::size_t> indices);
nn::Tensor images_tensor(std::span<const Image> images);
Image tensor_row_image(const nn::Tensor& batch, int row);

}  // namespace odm::data
