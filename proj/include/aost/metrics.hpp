#pragma once

#include <span>
#include <string>
#include <vector>

#include "aost/distances.hpp"
#include "aost/features.hpp"

namespace aost {

/// Per-layer, per-filter mean response, concatenated by layer then filter.
std::vector<double> pool_descriptor(const FeaturePyramid& pyramid);

struct GaussianFit {
  std::vector<double> mean;
  std::vector<double> covariance;  // row-major D x D, symmetrised
  std::size_t samples = 0;

  std::size_t dimension() const { return mean.size(); }
};

/// Sample mean and unbiased (n - 1) covariance. Throws ValidationError with
/// fewer than two descriptors or ragged lengths.
GaussianFit fit_gaussian(std::span<const std::vector<double>> descriptors);

/// Frechet distance between two Gaussians:
/// |mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_a S_b)^(1/2)), with the square-root
/// trace taken from the eigenvalues of S_a^(1/2) S_b S_a^(1/2). Eigenvalues
/// below 1e-10 of the largest are treated as zero and the result is clamped
/// at zero. Throws ShapeError on a dimension mismatch and ValidationError on
/// non-finite covariances.
double fid(const GaussianFit& a, const GaussianFit& b);

/// fid() before the final clamp, for inspecting numerical slack.
double fid_unclamped(const GaussianFit& a, const GaussianFit& b);

struct RegulationRow {
  std::string regulation;
  DistanceReport distance;
  double fid = 0.0;
};

/// One row per evaluated regulation term, in evaluation order.
struct DomainGapReport {
  std::vector<RegulationRow> rows;

  const RegulationRow& row(const std::string& regulation) const;
  /// Header `regulation,d_style,d_content,d_total,fid`.
  std::string to_csv() const;
};

/// A labelled set of images to compare against the target domain.
struct RegulationSubset {
  std::string label;
  std::span<const SceneImage> images;
};

struct EvaluationParams {
  DistanceParams distance;
  ExtractorSpec extractor;
  int threads = 1;
};

/// Everything about the target side that evaluation needs, computed once.
struct TargetEvaluation {
  std::vector<DistanceSignature> references;
  GaussianFit descriptors;
};

TargetEvaluation prepare_target(std::span<const SceneImage> target,
                                std::span<const SceneImage> references,
                                const EvaluationParams& params);

/// For each subset: mean config distance against the target references and
/// the Frechet distance between subset and target descriptor Gaussians.
DomainGapReport evaluate_regulations(std::span<const RegulationSubset> subsets,
                                     const TargetEvaluation& target,
                                     const EvaluationParams& params);

/// Shared helper: extracts and pools one image into (signature, descriptor).
struct ImageFeatures {
  DistanceSignature signature;
  std::vector<double> descriptor;
};

std::vector<ImageFeatures> extract_features(std::span<const SceneImage> images,
                                            const FilterBank& bank,
                                            const DistanceParams& distance, int threads);

}  // namespace aost
