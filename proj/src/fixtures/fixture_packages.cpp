#include "fixture_packages.hpp"

#include "fixture_models.hpp"
#include "odm/inventory/elf.hpp"
#include "odm/inventory/zip.hpp"
#include "odm/model/ondevice.hpp"
#include "odm/util/io.hpp"
#include "odm/util/rng.hpp"
#include "synthetic_signs.hpp"

namespace odm::fix {

namespace {

void append_cstr(std::vector<std::uint8_t>& buf, const std::string& s) {
  buf.insert(buf.end(), s.begin(), s.end());
  buf.push_back(0);
}

std::vector<std::uint8_t> framework_library(bool partial_identifiers) {
  std::vector<std::uint8_t> rodata;
  append_cstr(rodata, "GCC: (Ubuntu 11.4.0) 11.4.0");
  append_cstr(rodata, "TF_AllocateTensor");
  if (!partial_identifiers) append_cstr(rodata, "tensorflow/lite/kernels");
  append_cstr(rodata, "Invalid argument");
  return inventory::build_elf_with_rodata(rodata);
}

std::vector<std::uint8_t> plain_library() {
  std::vector<std::uint8_t> rodata;
  append_cstr(rodata, "GCC: (Ubuntu 11.4.0) 11.4.0");
  append_cstr(rodata, "libpng error: %s");
  append_cstr(rodata, "image decode failed");
  return inventory::build_elf_with_rodata(rodata);
}

std::string labels_text(int count) {
  const auto names = sign_class_names();
  std::string out;
  for (int i = 0; i < count; ++i) {
    out += i < static_cast<int>(names.size()) ? names[static_cast<std::size_t>(i)]
                                              : "class_" + std::to_string(i);
    out += "\n";
  }
  return out;
}

}  // namespace

std::vector<std::uint8_t> build_package(const PackageOptions& opts) {
  inventory::ZipWriter zip;
  zip.add_text("AndroidManifest.xml",
               "<manifest package=\"fixture.app" + std::to_string(opts.seed) + "\"/>", true);
  zip.add_text("classes.dex", "dex placeholder payload", true);
  zip.add_text("res/layout/main.xml", "<LinearLayout/>", true);
  zip.add_text("assets/readme.txt", "bundled asset notes\n");

  if (opts.with_framework_lib) {
    zip.add("lib/arm64-v8a/libtensorflowlite_jni.so", framework_library(false));
  } else if (opts.partial_identifiers) {
    zip.add("lib/arm64-v8a/libtensorflowlite_jni.so", framework_library(true));
  } else {
    zip.add("lib/arm64-v8a/libimageutil.so", plain_library());
  }

  if (opts.with_model) {
    auto bytes = model::serialize_flat_schema(victim_cnn(opts.seed, opts.label_count));
    if (opts.corrupt_model) bytes.resize(bytes.size() / 2);
    zip.add(opts.model_in_res_raw ? "res/raw/classifier.tflite" : "assets/classifier.tflite",
            bytes);
  }

  if (opts.with_labels) {
    zip.add_text("assets/labels.txt", labels_text(opts.label_count));
  }
  return zip.finish();
}

std::vector<std::string> write_fixture_corpus(const std::filesystem::path& dir,
                                              std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> names;
  // Five DL packages: framework library + valid model + matching labels.
  for (int i = 0; i < 5; ++i) {
    PackageOptions o;
    o.seed = rng::mix64(seed ^ static_cast<std::uint64_t>(i));
    o.model_in_res_raw = i % 2 == 1;
    const std::string name = "dl_app_" + std::to_string(i) + ".apk";
    util::write_file(dir / name, build_package(o));
    names.push_back(name);
  }
  // Five non-DL packages, including the tricky negatives.
  for (int i = 0; i < 5; ++i) {
    PackageOptions o;
    o.seed = rng::mix64(seed ^ (0x100u + static_cast<std::uint64_t>(i)));
    o.with_framework_lib = false;
    o.with_model = false;
    o.with_labels = false;
    if (i == 1) o.with_labels = true;               // labels but nothing else
    if (i == 2) o.with_model = true;                // stray model, no framework
    if (i == 3) {                                   // library with partial identifiers
      o.partial_identifiers = true;
    }
    if (i == 4) {                                   // corrupt model file
      o.with_model = true;
      o.corrupt_model = true;
    }
    const std::string name = "plain_app_" + std::to_string(i) + ".apk";
    util::write_file(dir / name, build_package(o));
    names.push_back(name);
  }
  return names;
}

}  // namespace odm::fix
