#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace agentrec {

/// Principal axes of an embedding set.
struct PcaModel {
  Eigen::VectorXd mean;         // length dim
  Eigen::MatrixXd components;   // dim × d, orthonormal columns
  Eigen::VectorXd eigenvalues;  // length d, descending, non-negative
  double residual = 0.0;        // largest final ‖Cv − λv‖ over components

  Eigen::Index dim() const noexcept { return mean.size(); }
  Eigen::Index rank() const noexcept { return components.cols(); }
};

struct PcaOptions {
  int max_iterations = 10000;
  double tolerance = 1e-10;  // relative to ‖C‖_F
  std::uint64_t seed = 0x5eed;
};

/// Top-d principal components (d ∈ {2, 3}) of the rows of data, using the
/// sample covariance (divisor m − 1), power iteration and deflation. Each
/// component's largest-magnitude entry is made positive.
PcaModel fit_pca(const Eigen::Ref<const Eigen::MatrixXd>& data, int d, const PcaOptions& options = {});

/// (data − mean) · components, one row per input row.
Eigen::MatrixXd project(const Eigen::Ref<const Eigen::MatrixXd>& data, const PcaModel& model);

/// CSV with header "agent,x,y[,z]" and 9 significant digits. Returns the
/// number of data rows written.
std::size_t export_plot_data(const Eigen::Ref<const Eigen::MatrixXd>& points, std::span<const std::string> labels,
                             const std::filesystem::path& path);
std::size_t export_plot_data(const Eigen::Ref<const Eigen::MatrixXd>& points, std::span<const std::string> labels,
                             std::ostream& out);

}  // namespace agentrec
