#include "odm/eval/classifier.hpp"

#include <algorithm>

#include "odm/data/dataset.hpp"
#include "odm/util/parallel.hpp"

namespace odm::eval {

Classifier classifier_from_graph(const nn::Graph& graph, int batch_size) {
  return Classifier{[&graph, batch_size](const std::vector<Image>& images) {
    std::vector<int> preds(images.size());
    if (images.empty()) return preds;
    nn::Runner runner(graph);
    for (std::size_t start = 0; start < images.size();
         start += static_cast<std::size_t>(batch_size)) {
      const std::size_t end =
          std::min(images.size(), start + static_cast<std::size_t>(batch_size));
      const auto batch =
          data::images_tensor(std::span<const Image>(images.data() + start, end - start));
      runner.forward({batch});
      const auto& out = runner.value(graph.outputs().front());
      const std::size_t per = out.count() / (end - start);
      for (std::size_t i = 0; i < end - start; ++i) {
        const float* row = out.ptr() + i * per;
        std::size_t best = 0;
        for (std::size_t j = 1; j < per; ++j) {
          if (row[j] > row[best]) best = j;
        }
        preds[start + i] = static_cast<int>(best);
      }
    }
    return preds;
  }};
}

Classifier classifier_from_interpreter(const model::Interpreter& interp) {
  return Classifier{[&interp](const std::vector<Image>& images) {
    std::vector<int> preds(images.size());
    util::parallel_blocks(images.size(), [&](int, std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) {
        std::vector<float> flat(images[i].px.begin(), images[i].px.end());
        const auto out = interp.run({flat});
        const auto& primary = out.front();
        std::size_t best = 0;
        for (std::size_t j = 1; j < primary.size(); ++j) {
          if (primary[j] > primary[best]) best = j;
        }
        preds[i] = static_cast<int>(best);
      }
    });
    return preds;
  }};
}

}  // namespace odm::eval
