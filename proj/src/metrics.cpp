#include "aost/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Dense>

#include "aost/error.hpp"
#include "aost/format.hpp"
#include "aost/parallel.hpp"

namespace aost {

std::vector<double> pool_descriptor(const FeaturePyramid& pyramid) {
  std::vector<double> out;
  for (const auto& m : pyramid.maps) {
    const std::size_t positions = m.positions();
    for (std::size_t i = 0; i < static_cast<std::size_t>(m.filters); ++i) {
      double sum = 0.0;
      for (float v : m.row(i)) sum += v;
      out.push_back(positions ? sum / static_cast<double>(positions) : 0.0);
    }
  }
  return out;
}

GaussianFit fit_gaussian(std::span<const std::vector<double>> descriptors) {
  if (descriptors.size() < 2) throw ValidationError("a Gaussian fit needs at least two samples");
  const std::size_t dim = descriptors[0].size();
  for (const auto& d : descriptors) {
    if (d.size() != dim) throw ValidationError("descriptors differ in length");
  }
  const double n = static_cast<double>(descriptors.size());
  GaussianFit fit;
  fit.samples = descriptors.size();
  fit.mean.assign(dim, 0.0);
  for (const auto& d : descriptors) {
    for (std::size_t i = 0; i < dim; ++i) fit.mean[i] += d[i];
  }
  for (auto& v : fit.mean) v /= n;

  fit.covariance.assign(dim * dim, 0.0);
  std::vector<double> centred(dim);
  for (const auto& d : descriptors) {
    for (std::size_t i = 0; i < dim; ++i) centred[i] = d[i] - fit.mean[i];
    for (std::size_t i = 0; i < dim; ++i) {
      for (std::size_t j = i; j < dim; ++j) fit.covariance[i * dim + j] += centred[i] * centred[j];
    }
  }
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = i; j < dim; ++j) {
      const double v = fit.covariance[i * dim + j] / (n - 1.0);
      fit.covariance[i * dim + j] = v;
      fit.covariance[j * dim + i] = v;
    }
  }
  return fit;
}

namespace {

using Matrix = Eigen::MatrixXd;

Matrix as_matrix(const GaussianFit& g) {
  const auto d = static_cast<Eigen::Index>(g.dimension());
  Matrix m(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      m(i, j) = g.covariance[static_cast<std::size_t>(i * d + j)];
    }
  }
  return 0.5 * (m + m.transpose());
}

/// Eigenvalues of a symmetric matrix with the small-eigenvalue rule applied.
Eigen::VectorXd clamped_eigenvalues(const Eigen::SelfAdjointEigenSolver<Matrix>& solver) {
  Eigen::VectorXd values = solver.eigenvalues();
  const double largest = values.size() ? values.maxCoeff() : 0.0;
  const double floor = 1e-10 * std::max(largest, 0.0);
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (values[i] < floor) values[i] = 0.0;
  }
  return values;
}

}  // namespace

double fid_unclamped(const GaussianFit& a, const GaussianFit& b) {
  if (a.dimension() != b.dimension()) {
    throw ShapeError("Gaussians of dimension " + std::to_string(a.dimension()) + " and " +
                     std::to_string(b.dimension()));
  }
  if (a.covariance.size() != a.dimension() * a.dimension() ||
      b.covariance.size() != b.dimension() * b.dimension()) {
    throw ShapeError("covariance matrix size does not match the mean");
  }
  for (double v : a.covariance) {
    if (!std::isfinite(v)) throw ValidationError("non-finite covariance");
  }
  for (double v : b.covariance) {
    if (!std::isfinite(v)) throw ValidationError("non-finite covariance");
  }
  if (a.mean == b.mean && a.covariance == b.covariance) return 0.0;

  double mean_term = 0.0;
  for (std::size_t i = 0; i < a.dimension(); ++i) {
    const double d = a.mean[i] - b.mean[i];
    mean_term += d * d;
  }
  const Matrix sa = as_matrix(a);
  const Matrix sb = as_matrix(b);

  Eigen::SelfAdjointEigenSolver<Matrix> eig_a(sa);
  const Eigen::VectorXd root_values = clamped_eigenvalues(eig_a).cwiseSqrt();
  const Matrix sqrt_a = eig_a.eigenvectors() * root_values.asDiagonal() * eig_a.eigenvectors().transpose();
  Matrix product = sqrt_a * sb * sqrt_a;
  product = 0.5 * (product + product.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig_p(product, Eigen::EigenvaluesOnly);
  const double trace_sqrt = clamped_eigenvalues(eig_p).cwiseSqrt().sum();

  return mean_term + sa.trace() + sb.trace() - 2.0 * trace_sqrt;
}

double fid(const GaussianFit& a, const GaussianFit& b) {
  return std::max(0.0, fid_unclamped(a, b));
}

// Regulation report ----------------------------------------------------------

const RegulationRow& DomainGapReport::row(const std::string& regulation) const {
  for (const auto& r : rows) {
    if (r.regulation == regulation) return r;
  }
  throw ValidationError("report has no row '" + regulation + "'");
}

std::string DomainGapReport::to_csv() const {
  std::ostringstream out;
  out << "regulation,d_style,d_content,d_total,fid\n";
  for (const auto& r : rows) {
    out << r.regulation << ',' << format_double(r.distance.d_style) << ','
        << format_double(r.distance.d_content) << ',' << format_double(r.distance.d_total) << ','
        << format_double(r.fid) << '\n';
  }
  return out.str();
}

std::vector<ImageFeatures> extract_features(std::span<const SceneImage> images,
                                            const FilterBank& bank,
                                            const DistanceParams& distance, int threads) {
  std::vector<ImageFeatures> out(images.size());
  parallel_for(images.size(), threads, [&](std::size_t i) {
    const FeaturePyramid pyr = extract(images[i], bank);
    out[i].signature = make_signature(pyr, distance);
    out[i].descriptor = pool_descriptor(pyr);
  });
  return out;
}

TargetEvaluation prepare_target(std::span<const SceneImage> target,
                                std::span<const SceneImage> references,
                                const EvaluationParams& params) {
  if (target.empty()) throw ValidationError("target set is empty");
  if (references.empty()) throw ValidationError("target reference set is empty");
  const FilterBank bank(params.extractor);
  TargetEvaluation out;

  std::vector<std::vector<double>> descriptors(target.size());
  parallel_for(target.size(), params.threads, [&](std::size_t i) {
    descriptors[i] = pool_descriptor(extract(target[i], bank));
  });
  out.descriptors = fit_gaussian(descriptors);

  out.references.resize(references.size());
  parallel_for(references.size(), params.threads, [&](std::size_t i) {
    out.references[i] = make_signature(extract(references[i], bank), params.distance);
  });
  return out;
}

DomainGapReport evaluate_regulations(std::span<const RegulationSubset> subsets,
                                     const TargetEvaluation& target,
                                     const EvaluationParams& params) {
  params.distance.validate();
  const FilterBank bank(params.extractor);
  DomainGapReport report;
  for (const auto& subset : subsets) {
    if (subset.images.empty()) throw ValidationError("subset '" + subset.label + "' is empty");
    const auto features = extract_features(subset.images, bank, params.distance, params.threads);

    std::vector<DistanceReport> per_image(features.size());
    parallel_for(features.size(), params.threads, [&](std::size_t i) {
      per_image[i] = image_distance(features[i].signature, target.references, params.distance);
    });
    RegulationRow row;
    row.regulation = subset.label;
    for (const auto& r : per_image) {
      row.distance.d_style += r.d_style;
      row.distance.d_content += r.d_content;
    }
    const double n = static_cast<double>(per_image.size());
    row.distance.d_style /= n;
    row.distance.d_content /= n;
    row.distance.d_total = total_distance(row.distance.d_style, row.distance.d_content, params.distance);

    std::vector<std::vector<double>> descriptors;
    descriptors.reserve(features.size());
    for (const auto& f : features) descriptors.push_back(f.descriptor);
    row.fid = fid(fit_gaussian(descriptors), target.descriptors);
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace aost
