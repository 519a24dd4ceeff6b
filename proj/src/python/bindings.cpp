// Copyright 2026 The ged Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>

#include "ged/checkpoint.hpp"
#include "ged/evaluation.hpp"
#include "ged/inference.hpp"
#include "ged/training.hpp"

namespace py = pybind11;
using namespace ged;

namespace {

using F64Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using U8Array = py::array_t<uint8_t, py::array::c_style | py::array::forcecast>;

template <typename T>
py::array_t<T> to_numpy(const Plane<T>& p) {
  py::array_t<T> a({p.height, p.width});
  std::memcpy(a.mutable_data(), p.px.data(), p.size() * sizeof(T));
  return a;
}

ProbMap prob_from(const F64Array& a) {
  require(a.ndim() == 2, "expected a 2-D float array");
  ProbMap m(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  std::memcpy(m.px.data(), a.data(), m.size() * sizeof(double));
  return m;
}

BinaryMap binary_from(const U8Array& a) {
  require(a.ndim() == 2, "expected a 2-D uint8 array");
  BinaryMap m(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  std::memcpy(m.px.data(), a.data(), m.size());
  require(is_binary(m), "binary maps hold 0 or 1");
  return m;
}

py::array_t<double> rgb_to_numpy(const RgbImage& im) {
  py::array_t<double> a({im.height, im.width, 3});
  std::memcpy(a.mutable_data(), im.data.data(), im.data.size() * sizeof(double));
  return a;
}

RgbImage rgb_from(const F64Array& a) {
  require(a.ndim() == 3 && a.shape(2) == 3, "expected an H x W x 3 float array");
  RgbImage im(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  std::memcpy(im.data.data(), a.data(), im.data.size() * sizeof(double));
  return im;
}

py::array_t<double> tensor_to_numpy(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<double> a(shape);
  std::memcpy(a.mutable_data(), t.storage().data(), t.size() * sizeof(double));
  return a;
}

// Owns the model and codec a Predictor borrows.
struct Model {
  std::unique_ptr<Denoiser> denoiser;
  LatentCodec codec;

  EdgePrediction predict(const F64Array& image, std::optional<double> g,
                         const std::string& caption) const {
    const auto& c = denoiser->config();
    return Predictor(*denoiser, codec)
        .predict(rgb_from(image), g, embed_caption(caption, c.text_tokens, c.text_width));
  }
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Latent edge prediction with granularity control, and boundary metrics.";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  // Data.
  m.def(
      "render_synthetic_image",
      [](uint64_t seed, int size) {
        Rng rng(seed);
        const AnnotatedImage s = render_synthetic_image(rng, size, "synthetic");
        py::list ann;
        for (const auto& a : s.annotations) ann.append(to_numpy(a));
        return py::make_tuple(rgb_to_numpy(s.image), ann);
      },
      py::arg("seed"), py::arg("size") = 128,
      "Returns (H x W x 3 image, list of annotator edge maps).");
  m.def(
      "generate_synthetic_corpus",
      [](int n, uint64_t seed, const std::filesystem::path& out, int size) {
        generate_synthetic_corpus(n, seed, out, {size, "train"});
        return out / "manifest.json";
      },
      py::arg("n"), py::arg("seed"), py::arg("out_dir"), py::arg("size") = 128);
  m.def(
      "compute_granularities",
      [](const std::vector<U8Array>& maps, bool single_label_mode) {
        std::vector<BinaryMap> v;
        for (const auto& a : maps) v.push_back(binary_from(a));
        return compute_granularities(v, single_label_mode);
      },
      py::arg("maps"), py::arg("single_label_mode") = false,
      "Normalized edge counts in [0, 1], or None when every map has the same count.");

  // Codec and conditioning.
  m.def(
      "encode_image",
      [](const F64Array& im) { return tensor_to_numpy(to_chw(LatentCodec().encode_image(rgb_from(im)))); },
      py::arg("image"), "4 x H/8 x W/8 latent of an image with sides divisible by 8.");
  m.def(
      "encode_edge",
      [](const U8Array& e) { return tensor_to_numpy(to_chw(LatentCodec().encode_edge(binary_from(e)))); },
      py::arg("edge_map"));
  m.def(
      "embed_caption",
      [](const std::string& c, int tokens, int width) {
        return tensor_to_numpy(embed_caption(c, tokens, width).data);
      },
      py::arg("caption"), py::arg("tokens") = kTextTokens, py::arg("width") = kTextWidth);
  m.def("sweep_grid", &sweep_grid, py::arg("m"));
  m.def("prediction_filename", &prediction_filename, py::arg("image_id"), py::arg("g"));

  // Model.
  py::class_<UNetConfig>(m, "UNetConfig")
      .def(py::init<>())
      .def_readwrite("base_channels", &UNetConfig::base_channels)
      .def_readwrite("stage_multipliers", &UNetConfig::stage_multipliers)
      .def_readwrite("attention_stages", &UNetConfig::attention_stages)
      .def_readwrite("text_tokens", &UNetConfig::text_tokens)
      .def_readwrite("text_width", &UNetConfig::text_width)
      .def_readwrite("embed_dim", &UNetConfig::embed_dim)
      .def_readwrite("init_seed", &UNetConfig::init_seed)
      .def_property(
          "strategy", [](const UNetConfig& c) { return to_string(c.strategy); },
          [](UNetConfig& c, const std::string& s) { c.strategy = granularity_strategy_from_string(s); })
      .def("__repr__", [](const UNetConfig& c) { return "UNetConfig(" + to_json(c).dump() + ")"; });

  py::class_<EdgePrediction>(m, "EdgePrediction")
      .def_property_readonly("prob_map", [](const EdgePrediction& p) { return to_numpy(p.prob_map); })
      .def_readonly("granularity", &EdgePrediction::granularity)
      .def_readonly("image_id", &EdgePrediction::image_id);

  py::class_<Model>(m, "Model")
      .def(py::init([](const UNetConfig& c) { return Model{std::make_unique<Denoiser>(c), {}}; }),
           py::arg("config"))
      .def_static(
          "load",
          [](const std::filesystem::path& p) {
            Checkpoint ck = load_checkpoint(p);
            return Model{std::move(ck.model), ck.codec};
          },
          py::arg("path"))
      .def("save",
           [](const Model& self, const std::filesystem::path& p) {
             save_checkpoint(p, *self.denoiser, self.codec);
           })
      .def_property_readonly("config", [](const Model& self) { return self.denoiser->config(); })
      .def_property_readonly("parameter_count",
                             [](const Model& self) { return self.denoiser->parameters().total_size(); })
      .def("predict", &Model::predict, py::arg("image"), py::arg("g") = py::none(),
           py::arg("caption") = "", py::call_guard<py::gil_scoped_release>())
      .def(
          "sweep",
          [](const Model& self, const F64Array& image, int count, const std::string& caption) {
            const auto& c = self.denoiser->config();
            const RgbImage im = rgb_from(image);
            const TextEmbedding text = embed_caption(caption, c.text_tokens, c.text_width);
            py::gil_scoped_release release;
            return Predictor(*self.denoiser, self.codec).sweep(im, count, text);
          },
          py::arg("image"), py::arg("m") = 11, py::arg("caption") = "");

  // Evaluation.
  py::class_<MatchConfig>(m, "MatchConfig")
      .def(py::init<>())
      .def_readwrite("max_dist_frac", &MatchConfig::max_dist_frac)
      .def_readwrite("n_thresholds", &MatchConfig::n_thresholds)
      .def_readwrite("apply_nms", &MatchConfig::apply_nms)
      .def("thresholds", &MatchConfig::thresholds);

  py::class_<EvalResult>(m, "EvalResult")
      .def_readonly("ods", &EvalResult::ods)
      .def_readonly("ods_threshold", &EvalResult::ods_threshold)
      .def_readonly("ois", &EvalResult::ois)
      .def_readonly("ois_independent", &EvalResult::ois_independent)
      .def_readonly("ap", &EvalResult::ap)
      .def_property_readonly("curve", [](const EvalResult& r) {
        py::list out;
        for (const auto& p : r.curve)
          out.append(py::make_tuple(p.threshold, p.precision, p.recall, p.f_measure));
        return out;
      })
      .def("__repr__", [](const EvalResult& r) {
        return "EvalResult(ods=" + std::to_string(r.ods) + ", ois=" + std::to_string(r.ois) +
               ", ap=" + std::to_string(r.ap) + ")";
      });

  m.def("nms_thin", [](const F64Array& a) { return to_numpy(nms_thin(prob_from(a))); },
        py::arg("prob_map"));
  m.def(
      "correspond_pixels",
      [](const U8Array& pred, const U8Array& gt, double max_dist) {
        const MatchResult r = correspond_pixels_ref(binary_from(pred), binary_from(gt), max_dist);
        return py::make_tuple(r.matched, to_numpy(r.pred_matched), to_numpy(r.gt_matched));
      },
      py::arg("pred"), py::arg("gt"), py::arg("max_dist_px"),
      "Greedy one-to-one matching; returns (count, pred mask, gt mask).");
  m.def(
      "evaluate",
      [](const std::vector<std::vector<F64Array>>& predictions,
         const std::vector<std::vector<U8Array>>& annotations, const MatchConfig& config,
         const std::string& kernel) {
        require(predictions.size() == annotations.size(), "one prediction list per image");
        std::vector<PredictionSet> preds;
        std::vector<GroundTruth> gts;
        size_t m_max = 0;
        for (size_t i = 0; i < predictions.size(); ++i) {
          const std::string id = "image" + std::to_string(i);
          PredictionSet set{id, {}};
          for (const auto& a : predictions[i]) set.maps.push_back(prob_from(a));
          m_max = std::max(m_max, set.maps.size());
          GroundTruth g{id, {}};
          for (const auto& a : annotations[i]) g.annotations.push_back(binary_from(a));
          preds.push_back(std::move(set));
          gts.push_back(std::move(g));
        }
        const auto backend = make_backend(kernel);
        py::gil_scoped_release release;
        return m_max > 1 ? evaluate_multi(preds, gts, config, *backend)
                         : evaluate(preds, gts, config, *backend);
      },
      py::arg("predictions"), py::arg("annotations"), py::arg("config") = MatchConfig(),
      py::arg("kernel") = "ref",
      "predictions[i] lists the M maps of image i; M > 1 gives best-ODS/OIS.");
}
