#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "aost/cli.hpp"
#include "aost/distances.hpp"
#include "aost/error.hpp"
#include "aost/features.hpp"
#include "aost/metrics.hpp"
#include "aost/scenegen.hpp"

namespace py = pybind11;
using namespace aost;

namespace {

using ImageArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

ImageArray to_array(const SceneImage& image) {
  ImageArray out({image.height, image.width, 3});
  std::memcpy(out.mutable_data(), image.rgb.data(), image.rgb.size());
  return out;
}

SceneImage from_array(const ImageArray& array) {
  if (array.ndim() != 3 || array.shape(2) != 3) {
    throw ShapeError("expected an image array of shape (height, width, 3)");
  }
  SceneImage image(static_cast<int>(array.shape(1)), static_cast<int>(array.shape(0)));
  std::memcpy(image.rgb.data(), array.data(), image.rgb.size());
  return image;
}

GaussianFit make_fit(const std::vector<double>& mean,
                     const std::vector<std::vector<double>>& covariance) {
  GaussianFit fit;
  fit.mean = mean;
  for (const auto& row : covariance) {
    if (row.size() != mean.size()) throw ShapeError("covariance must be square and match the mean");
    fit.covariance.insert(fit.covariance.end(), row.begin(), row.end());
  }
  if (covariance.size() != mean.size()) throw ShapeError("covariance must be square and match the mean");
  fit.samples = 2;
  return fit;
}

}  // namespace

PYBIND11_MODULE(_aost, m) {
  m.doc() = "Attribute optimisation and style transfer for synthetic person images";
  m.attr("__version__") = kToolVersion;

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);

  m.def("schema", [] {
    const AttributeSchema schema = AttributeSchema::finegpr();
    std::vector<std::pair<std::string, int>> out;
    for (const auto& d : schema.dimensions()) out.emplace_back(d.name, d.cardinality);
    return out;
  }, "Dimension names and cardinalities of the built-in attribute schema.");

  m.def(
      "render",
      [](const std::vector<int>& values, std::int64_t identity, std::uint64_t seed, int width,
         int height) {
        return to_array(render(AttributeSchema::finegpr(), AttributeConfig{values}, identity, seed,
                               RenderOptions{width, height}));
      },
      py::arg("config"), py::arg("identity") = 0, py::arg("seed") = 0, py::arg("width") = 64,
      py::arg("height") = 128, "Renders one scene as a (height, width, 3) uint8 array.");

  m.def(
      "total_distance",
      [](double d_style, double d_content, double alpha, double beta) {
        DistanceParams p;
        p.alpha = alpha;
        p.beta = beta;
        p.validate();
        return total_distance(d_style, d_content, p);
      },
      py::arg("d_style"), py::arg("d_content"), py::arg("alpha") = 0.9, py::arg("beta") = 1.0);

  m.def(
      "image_distance",
      [](const ImageArray& a, const ImageArray& b, double alpha, double beta) {
        DistanceParams p;
        p.alpha = alpha;
        p.beta = beta;
        p.validate();
        const FilterBank bank{ExtractorSpec{}};
        const FeaturePyramid fa = extract(from_array(a), bank);
        const FeaturePyramid fb = extract(from_array(b), bank);
        const auto layer = static_cast<std::size_t>(p.content_layer);
        const double d_style = style_distance(fa, fb);
        const double d_content = content_distance(fa.maps.at(layer), fb.maps.at(layer));
        py::dict out;
        out["d_style"] = d_style;
        out["d_content"] = d_content;
        out["d_total"] = total_distance(d_style, d_content, p);
        return out;
      },
      py::arg("a"), py::arg("b"), py::arg("alpha") = 0.9, py::arg("beta") = 1.0,
      "Style, content and weighted distances between two images under the default extractor.");

  m.def(
      "fid",
      [](const std::vector<double>& mean_a, const std::vector<std::vector<double>>& cov_a,
         const std::vector<double>& mean_b, const std::vector<std::vector<double>>& cov_b) {
        return fid(make_fit(mean_a, cov_a), make_fit(mean_b, cov_b));
      },
      py::arg("mean_a"), py::arg("cov_a"), py::arg("mean_b"), py::arg("cov_b"),
      "Frechet distance between two Gaussians given by mean and covariance.");

  m.def(
      "main",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "aost");
        std::vector<char*> argv;
        for (auto& a : args) argv.push_back(a.data());
        return run_cli(static_cast<int>(argv.size()), argv.data());
      },
      py::arg("args"), "Runs the command-line tool with the given arguments; returns its exit status.");
}
