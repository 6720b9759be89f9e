#include <iostream>

#include "CLI11.hpp"
#include "odm/attack/backdoor.hpp"
#include "odm/convert/convert.hpp"
#include "odm/data/dataset.hpp"
#include "odm/errors.hpp"
#include "odm/eval/classifier.hpp"
#include "odm/eval/metrics.hpp"
#include "odm/util/io.hpp"
#include "src/fixtures/fixture_models.hpp"
#include "src/fixtures/fixture_packages.hpp"
#include "src/fixtures/synthetic_signs.hpp"

// Desk-scale fixture generator: synthetic sign datasets, a fixture APK
// corpus, and a trained victim classifier packaged as an on-device model.

int main(int argc, char** argv) {
  CLI::App app{"fixture generator for the pipeline examples and tests"};
  app.require_subcommand(1);

  std::string out_dir = "fixtures";
  std::uint64_t seed = 42;
  int train_per_class = 500, test_per_class = 100, size = 32;
  int epochs = 10;
  std::string dataset_dir;

  auto* dataset = app.add_subcommand("dataset", "synthetic sign dataset (train/ + test/)");
  dataset->add_option("--out", out_dir, "output directory")->required();
  dataset->add_option("--seed", seed);
  dataset->add_option("--train-per-class", train_per_class);
  dataset->add_option("--test-per-class", test_per_class);
  dataset->add_option("--size", size);

  auto* corpus = app.add_subcommand("corpus", "10 fixture app packages");
  corpus->add_option("--out", out_dir, "output directory")->required();
  corpus->add_option("--seed", seed);

  auto* victim = app.add_subcommand("victim", "train a clean victim and export it");
  victim->add_option("--dataset", dataset_dir, "training images (class dirs)")->required();
  victim->add_option("--out", out_dir, "output model file")->required();
  victim->add_option("--seed", seed);
  victim->add_option("--epochs", epochs);

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(dataset)) {
      const auto train = odm::fix::make_sign_dataset(
          static_cast<std::size_t>(train_per_class), seed, size);
      const auto test = odm::fix::make_sign_dataset(
          static_cast<std::size_t>(test_per_class), odm::rng::mix64(seed ^ 0x7e57), size);
      odm::data::save_directory(train, std::filesystem::path(out_dir) / "train");
      odm::data::save_directory(test, std::filesystem::path(out_dir) / "test");
      std::cout << "dataset: " << train.size() << " train / " << test.size() << " test -> "
                << out_dir << "\n";
    } else if (app.got_subcommand(corpus)) {
      const auto names = odm::fix::write_fixture_corpus(out_dir, seed);
      std::cout << "corpus: " << names.size() << " packages -> " << out_dir << "\n";
    } else if (app.got_subcommand(victim)) {
      const auto train = odm::data::load_directory(dataset_dir);
      auto source = odm::fix::victim_cnn(seed, train.num_classes(), train.images[0].h);
      auto trainable = odm::convert::reconstruct_trainable(source);
      odm::convert::map_parameters(source, trainable);
      odm::attack::TrainSchedule schedule;
      schedule.epochs = epochs;
      schedule.batch_size = 64;
      schedule.lr = 1e-3f;
      schedule.seed = seed;
      const auto log = odm::attack::train_clean(trainable, train, schedule);
      std::cout << "victim: final train accuracy " << log.back().train_accuracy << "%\n";
      odm::util::write_file(out_dir,
                            odm::convert::export_deployable(trainable, "fixture-victim"));
      std::cout << "victim -> " << out_dir << "\n";
    }
    return 0;
  } catch (const odm::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
