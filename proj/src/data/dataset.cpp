#include "odm/data/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "nlohmann/json.hpp"
#include "odm/errors.hpp"
#include "odm/util/io.hpp"

namespace odm::data {

int Dataset::num_classes() const {
  if (!class_names.empty()) return static_cast<int>(class_names.size());
  int mx = -1;
  for (const int l : labels) mx = std::max(mx, l);
  return mx + 1;
}

void Dataset::push(Image im, int label, std::string id) {
  images.push_back(std::move(im));
  labels.push_back(label);
  ids.push_back(std::move(id));
}

Dataset load_directory(const std::filesystem::path& root) {
  if (!std::filesystem::is_directory(root)) {
    throw Error("dataset root is not a directory: " + root.string());
  }
  std::vector<std::string> classes;
  for (const auto& entry : std::filesystem::directory_iterator(root)) {
    if (entry.is_directory()) classes.push_back(entry.path().filename().string());
  }
  std::sort(classes.begin(), classes.end());
  Dataset ds;
  ds.class_names = classes;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(root / classes[c])) {
      if (entry.is_regular_file() && entry.path().extension() == ".png") {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      ds.push(img::read_png(f), static_cast<int>(c),
              classes[c] + "/" + f.filename().string());
    }
  }
  return ds;
}

Dataset load_manifest(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw Error("cannot open manifest: " + manifest.string());
  const auto base = manifest.parent_path();
  Dataset ds;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error("manifest line is not valid JSON: " + std::string(e.what()));
    }
    if (j.contains("class_names")) {
      ds.class_names = j.at("class_names").get<std::vector<std::string>>();
      continue;
    }
    const auto rel = j.at("path").get<std::string>();
    ds.push(img::read_png(base / rel), j.at("label").get<int>(), rel);
  }
  return ds;
}

void save_directory(const Dataset& ds, const std::filesystem::path& root,
                    const std::string& config_digest) {
  std::map<std::string, std::string> text;
  if (!config_digest.empty()) text["config_digest"] = config_digest;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const std::string cls = ds.labels[i] < static_cast<int>(ds.class_names.size())
                                ? ds.class_names[static_cast<std::size_t>(ds.labels[i])]
                                : std::to_string(ds.labels[i]);
    char name[32];
    std::snprintf(name, sizeof(name), "%06zu.png", i);
    img::write_png(root / cls / name, ds.images[i], text);
  }
}

Dataset subset(const Dataset& ds, std::span<const std::size_t> indices) {
  Dataset out;
  out.class_names = ds.class_names;
  for (const auto i : indices) out.push(ds.images[i], ds.labels[i], ds.ids[i]);
  return out;
}

nn::Tensor images_tensor(std::span<const Image> images) {
  if (images.empty()) throw Error("empty image batch");
  const int h = images[0].h, w = images[0].w, c = images[0].c;
  nn::Tensor t({static_cast<int>(images.size()), h, w, c});
  const std::size_t per = static_cast<std::size_t>(h) * w * c;
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].h != h || images[i].w != w || images[i].c != c) {
      throw ShapeMismatch("batch contains mixed image shapes");
    }
    std::copy(images[i].px.begin(), images[i].px.end(), t.data.begin() + i * per);
  }
  return t;
}

nn::Tensor batch_tensor(const Dataset& ds, std::span<const std::size_t> indices) {
  std::vector<Image> tmp;
  tmp.reserve(indices.size());
  for (const auto i : indices) tmp.push_back(ds.images[i]);
  return images_tensor(tmp);
}

Image tensor_row_image(const nn::Tensor& batch, int row) {
  const int h = batch.dim(1), w = batch.dim(2), c = batch.dim(3);
  Image im(h, w, c);
  const std::size_t per = static_cast<std::size_t>(h) * w * c;
  std::copy(batch.data.begin() + row * per, batch.data.begin() + (row + 1) * per,
            im.px.begin());
  return im;
}

}  // namespace odm::data
