#include <set>

#include "doctest.h"
#include "odm/errors.hpp"
#include "odm/inventory/elf.hpp"
#include "odm/inventory/scan.hpp"
#include "odm/inventory/zip.hpp"
#include "odm/model/ondevice.hpp"
#include "src/fixtures/fixture_models.hpp"
#include "src/fixtures/fixture_packages.hpp"

using namespace odm;
using namespace odm::inventory;

namespace {

std::vector<std::uint8_t> elf_with_strings(const std::vector<std::string>& strings) {
  std::vector<std::uint8_t> rodata;
  for (const auto& s : strings) {
    rodata.insert(rodata.end(), s.begin(), s.end());
    rodata.push_back(0);
  }
  return build_elf_with_rodata(rodata);
}

}  // namespace

TEST_CASE("zip round trip with stored and deflated entries") {
  ZipWriter w;
  w.add_text("a.txt", "hello zip");
  std::string big(4000, 'x');
  w.add_text("dir/b.bin", big, true);
  const auto bytes = w.finish();

  ZipReader r(bytes);
  REQUIRE(r.entries().size() == 2);
  const auto a = r.find("a.txt");
  REQUIRE(a.has_value());
  const auto got = r.extract(*a);
  CHECK(std::string(got.begin(), got.end()) == "hello zip");
  const auto b = r.find("dir/b.bin");
  REQUIRE(b.has_value());
  CHECK(b->method == 8);
  CHECK(b->compressed_size < b->uncompressed_size);
  const auto big_got = r.extract(*b);
  CHECK(std::string(big_got.begin(), big_got.end()) == big);
}

TEST_CASE("zip reader rejects non-archives and corrupted directories") {
  const std::vector<std::uint8_t> exe_like = {'M', 'Z', 0, 0};
  const std::vector<std::uint8_t> zeros(40, 0);
  CHECK_THROWS_AS((void)ZipReader(exe_like), NotAnApk);
  CHECK_THROWS_AS((void)ZipReader(zeros), NotAnApk);

  ZipWriter w;
  w.add_text("f", "content");
  auto bytes = w.finish();
  // break the central-directory offset stored in the EOCD record
  bytes[bytes.size() - 6] = 0xff;
  bytes[bytes.size() - 5] = 0xff;
  CHECK_THROWS_AS((void)ZipReader(bytes), CorruptArchive);
}

TEST_CASE("zip extract detects crc mismatches") {
  ZipWriter w;
  w.add_text("f.txt", "payload payload payload");
  auto bytes = w.finish();
  // flip one payload byte inside the stored entry
  const std::string needle = "payload";
  for (std::size_t i = 0; i + needle.size() < bytes.size(); ++i) {
    if (std::equal(needle.begin(), needle.end(), bytes.begin() + static_cast<long>(i))) {
      bytes[i] ^= 0x20;
      break;
    }
  }
  ZipReader r(bytes);
  CHECK_THROWS_AS(r.extract(*r.find("f.txt")), CorruptArchive);
}

TEST_CASE("rodata extraction from the fixture elf") {
  const auto elf = elf_with_strings({"alpha", "beta"});
  const auto rodata = rodata_section(elf);
  const std::string text(rodata.begin(), rodata.end());
  CHECK(text.find("alpha") != std::string::npos);
  CHECK(text.find("beta") != std::string::npos);
}

TEST_CASE("elf parsing failure modes") {
  CHECK_THROWS_AS(rodata_section(std::vector<std::uint8_t>{1, 2, 3, 4}), NotAnElf);

  // valid magic but no section table
  std::vector<std::uint8_t> stripped(64, 0);
  stripped[0] = 0x7f;
  stripped[1] = 'E';
  stripped[2] = 'L';
  stripped[3] = 'F';
  stripped[4] = 2;
  stripped[5] = 1;
  CHECK_THROWS_AS(rodata_section(stripped), MissingRodata);
}

TEST_CASE("detect_frameworks requires every identifier by default") {
  const std::vector<FrameworkSignature> sigs = {
      {"TensorFlow", {"TF_AllocateTensor", "tensorflow"}},
      {"TFLite", {"TfLiteIntArrayCreate", "tflite"}},
  };

  SUBCASE("both strings present") {
    const auto elf = elf_with_strings({"TF_AllocateTensor", "tensorflow/core"});
    CHECK(detect_frameworks(elf, sigs) == std::set<std::string>{"TensorFlow"});
  }
  SUBCASE("neither string present") {
    const auto elf = elf_with_strings({"nothing", "relevant"});
    CHECK(detect_frameworks(elf, sigs).empty());
  }
  SUBCASE("one of two strings only matches in any-mode") {
    const auto elf = elf_with_strings({"tensorflow"});
    CHECK(detect_frameworks(elf, sigs, true).empty());
    CHECK(detect_frameworks(elf, sigs, false) == std::set<std::string>{"TensorFlow"});
  }
  SUBCASE("planted TFLite identifiers") {
    const auto elf = elf_with_strings({"TfLiteIntArrayCreate", "tflite::Interpreter"});
    CHECK(detect_frameworks(elf, sigs) == std::set<std::string>{"TFLite"});
  }
  SUBCASE("result is a subset of the signature table") {
    const auto elf = elf_with_strings(
        {"TF_AllocateTensor", "tensorflow", "TfLiteIntArrayCreate", "tflite", "junk"});
    const auto found = detect_frameworks(elf, sigs);
    for (const auto& f : found) {
      CHECK((f == "TensorFlow" || f == "TFLite"));
    }
    CHECK(found.size() == 2);
  }
}

TEST_CASE("find_model_candidates filters by directory and suffix, sorted") {
  MemoryFileTree tree;
  tree.add_text("assets/readme.txt", "not a model");
  tree.add_text("res/raw/net.pb", "pb-bytes");
  tree.add_text("assets/x.bin", "bin-bytes");
  tree.add_text("assets/deep/model.tflite", "tflite-bytes");
  tree.add_text("lib/arm64/libfoo.so", "elf");
  tree.add_text("model_outside.tflite", "outside the scanned dirs");

  const auto found = find_model_candidates(tree);
  REQUIRE(found.size() == 3);
  CHECK(found[0].archive_path == "assets/deep/model.tflite");
  CHECK(found[0].format_hint == FormatHint::FlatSchema);
  CHECK(found[1].archive_path == "assets/x.bin");
  CHECK(found[1].format_hint == FormatHint::Unknown);
  CHECK(found[2].archive_path == "res/raw/net.pb");
  CHECK(found[2].format_hint == FormatHint::GraphProto);
  for (const auto& c : found) {
    CHECK(c.validation == Validation::Unvalidated);
    CHECK(c.size_bytes == tree.read(c.archive_path).size());
  }
}

TEST_CASE("empty tree yields no candidates") {
  MemoryFileTree tree;
  CHECK(find_model_candidates(tree).empty());
}

TEST_CASE("validate_model accepts real fixtures and rejects junk") {
  const auto m = fix::tiny_cnn(3);
  const auto flat = model::serialize_flat_schema(m);
  const auto proto = model::serialize_graph_proto(m);

  CHECK(validate_model(flat, FormatHint::FlatSchema) == Validation::Valid);
  CHECK(validate_model(proto, FormatHint::GraphProto) == Validation::Valid);
  CHECK(validate_model(flat, FormatHint::Unknown) == Validation::Valid);

  std::string reason;
  auto truncated = flat;
  truncated.resize(truncated.size() / 2);
  CHECK(validate_model(truncated, FormatHint::FlatSchema, &reason) == Validation::Invalid);
  CHECK(!reason.empty());
  CHECK(validate_model({}, FormatHint::FlatSchema) == Validation::Invalid);
  CHECK(validate_model(flat, FormatHint::GraphProto) == Validation::Invalid);
}

TEST_CASE("every strict prefix of a model file is invalid") {
  const auto flat = model::serialize_flat_schema(fix::tiny_cnn(4));
  for (std::size_t len = 0; len < flat.size();
       len += std::max<std::size_t>(1, flat.size() / 64)) {
    std::vector<std::uint8_t> prefix(flat.begin(), flat.begin() + static_cast<long>(len));
    CHECK(validate_model(prefix, FormatHint::FlatSchema) == Validation::Invalid);
  }
}

TEST_CASE("find_label_files parses text and json, flags failures") {
  MemoryFileTree tree;
  tree.add_text("assets/labels.txt",
                "cat\ndog\n bird \nfish\nfrog\nhorse\ncow\nbee\nant\nowl\n");
  tree.add_text("assets/data.txt", "no keyword in the name");
  tree.add_text("assets/label_map.json", R"(["cat","dog"])");
  tree.add_text("assets/class_ids.json", R"({"1":"b","0":"a","2":"c"})");
  tree.add_text("assets/labels_dup.txt", "same\nsame\n");
  tree.add("assets/labels_bin.txt", std::vector<std::uint8_t>{0x00, 0x01, 0x02});

  const auto found = find_label_files(tree);
  REQUIRE(found.size() == 5);

  CHECK(found[0].archive_path == "assets/class_ids.json");
  CHECK(found[0].labels == std::vector<std::string>{"a", "b", "c"});

  CHECK(found[1].archive_path == "assets/label_map.json");
  CHECK(found[1].labels == std::vector<std::string>{"cat", "dog"});
  CHECK(found[1].label_count == 2);

  CHECK(found[2].archive_path == "assets/labels.txt");
  CHECK(found[2].label_count == 10);
  CHECK(found[2].labels[2] == "bird");  // whitespace stripped

  CHECK(found[3].archive_path == "assets/labels_bin.txt");
  CHECK(found[3].label_count == 0);
  CHECK(!found[3].error.empty());

  CHECK(found[4].archive_path == "assets/labels_dup.txt");
  CHECK(found[4].has_duplicates);
}

TEST_CASE("scan_apk aggregates frameworks, candidates and labels") {
  fix::PackageOptions opts;
  opts.seed = 77;
  const auto bytes = fix::build_package(opts);
  const auto rec = scan_package_bytes("fixture.apk", bytes);

  CHECK(rec.is_dl_app);
  CHECK(rec.frameworks_detected == std::vector<std::string>{"TensorFlow"});
  REQUIRE(rec.model_candidates.size() == 1);
  CHECK(rec.model_candidates[0].validation == Validation::Valid);
  REQUIRE(rec.label_files.size() == 1);
  CHECK(rec.label_files[0].label_count == 10);
}

TEST_CASE("scan_apk marks packages without frameworks as non-DL") {
  fix::PackageOptions opts;
  opts.with_framework_lib = false;
  opts.with_model = false;
  opts.with_labels = false;
  const auto rec = scan_package_bytes("plain.apk", fix::build_package(opts));
  CHECK(!rec.is_dl_app);
  CHECK(rec.frameworks_detected.empty());
  CHECK(rec.model_candidates.empty());
}

TEST_CASE("valid model without a framework library is flagged for review") {
  fix::PackageOptions opts;
  opts.with_framework_lib = false;
  opts.with_labels = false;
  const auto rec = scan_package_bytes("stray.apk", fix::build_package(opts));
  CHECK(!rec.is_dl_app);
  REQUIRE(rec.model_candidates.size() == 1);
  CHECK(rec.model_candidates[0].validation == Validation::Valid);
  bool flagged = false;
  for (const auto& note : rec.notes) {
    if (note.find("model-without-framework") != std::string::npos) flagged = true;
  }
  CHECK(flagged);
}

TEST_CASE("scan is deterministic modulo timestamp") {
  fix::PackageOptions opts;
  opts.seed = 5;
  const auto bytes = fix::build_package(opts);
  auto a = scan_package_bytes("p.apk", bytes);
  auto b = scan_package_bytes("p.apk", bytes);
  a.scan_timestamp.clear();
  b.scan_timestamp.clear();
  CHECK(to_jsonl(a) == to_jsonl(b));
}

TEST_CASE("adding a file never removes previously reported records") {
  // property: candidate and label listings are monotone in the file set
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    fix::PackageOptions opts;
    opts.seed = seed;
    const auto before = scan_package_bytes("p.apk", fix::build_package(opts));

    ZipWriter w;
    {
      ZipReader r(fix::build_package(opts));
      for (const auto& e : r.entries()) w.add(e.name, r.extract(e));
    }
    w.add_text("assets/extra_model.tflite", "junk-but-reported");
    w.add_text("assets/more_labels.txt", "a\nb\n");
    const auto after = scan_package_bytes("p.apk", w.finish());

    std::set<std::string> before_models, after_models;
    for (const auto& c : before.model_candidates) before_models.insert(c.archive_path);
    for (const auto& c : after.model_candidates) after_models.insert(c.archive_path);
    for (const auto& path : before_models) CHECK(after_models.count(path) == 1);

    std::set<std::string> before_labels, after_labels;
    for (const auto& l : before.label_files) before_labels.insert(l.archive_path);
    for (const auto& l : after.label_files) after_labels.insert(l.archive_path);
    for (const auto& path : before_labels) CHECK(after_labels.count(path) == 1);
  }
}

TEST_CASE("inventory jsonl record round-trips") {
  fix::PackageOptions opts;
  opts.seed = 9;
  const auto rec = scan_package_bytes("p.apk", fix::build_package(opts));
  const auto line = to_jsonl(rec);
  const auto back = inventory_from_json(line);
  CHECK(to_jsonl(back) == line);
}
