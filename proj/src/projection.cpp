#include "agentrec/projection.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include "agentrec/error.hpp"

namespace agentrec {

namespace {

void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
  Eigen::Index at = 0;
  v.cwiseAbs().maxCoeff(&at);
  if (v[at] < 0.0) v = -v;
}

}  // namespace

PcaModel fit_pca(const Eigen::Ref<const Eigen::MatrixXd>& data, int d, const PcaOptions& options) {
  if (d != 2 && d != 3) throw Error(ErrorCode::invalid_input, "PCA supports 2 or 3 components");
  const Eigen::Index m = data.rows();
  const Eigen::Index dim = data.cols();
  if (m < d + 1) {
    throw Error(ErrorCode::invalid_input,
                "PCA needs at least " + std::to_string(d + 1) + " rows, got " + std::to_string(m));
  }
  if (dim < d) throw Error(ErrorCode::invalid_input, "PCA dimension is smaller than the requested rank");
  if (!data.allFinite()) throw Error(ErrorCode::invalid_input, "PCA input has non-finite entries");

  PcaModel model;
  model.mean = data.colwise().mean().transpose();
  const Eigen::MatrixXd centered = data.rowwise() - model.mean.transpose();
  Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(m - 1);
  const double scale = cov.norm();
  const double tol = options.tolerance * scale;

  model.components.resize(dim, d);
  model.eigenvalues.resize(d);
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> gauss;

  for (int c = 0; c < d; ++c) {
    Eigen::VectorXd v(dim);
    for (Eigen::Index j = 0; j < dim; ++j) v[j] = gauss(rng);
    v.normalize();

    double lambda = 0.0;
    double residual = std::numeric_limits<double>::infinity();
    int it = 0;
    for (; it < options.max_iterations; ++it) {
      // Keep the iterate orthogonal to the components already found.
      for (int prev = 0; prev < c; ++prev) v -= model.components.col(prev).dot(v) * model.components.col(prev);
      const double vn = v.norm();
      if (vn == 0.0) break;
      v /= vn;
      const Eigen::VectorXd w = cov * v;
      lambda = v.dot(w);
      residual = (w - lambda * v).norm();
      if (residual <= tol) break;
      const double wn = w.norm();
      if (wn == 0.0) break;
      v = w / wn;
    }
    if (!(residual <= tol)) {
      std::ostringstream msg;
      msg << "PCA component " << c << " did not converge after " << options.max_iterations
          << " iterations (residual " << residual << ", tolerance " << tol << ")";
      throw Error(ErrorCode::numerical_error, msg.str());
    }
    if (lambda < -1e-10 * std::max(1.0, scale)) {
      throw Error(ErrorCode::numerical_error, "PCA produced a negative eigenvalue " + std::to_string(lambda));
    }
    fix_sign(v);
    model.components.col(c) = v;
    model.eigenvalues[c] = std::max(lambda, 0.0);
    model.residual = std::max(model.residual, residual);
    cov -= lambda * v * v.transpose();
  }

  // Deflation yields descending order up to rounding in degenerate spectra.
  std::vector<int> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return model.eigenvalues[a] > model.eigenvalues[b]; });
  const Eigen::MatrixXd comps = model.components;
  const Eigen::VectorXd vals = model.eigenvalues;
  for (int c = 0; c < d; ++c) {
    model.components.col(c) = comps.col(order[static_cast<std::size_t>(c)]);
    model.eigenvalues[c] = vals[order[static_cast<std::size_t>(c)]];
  }
  return model;
}

Eigen::MatrixXd project(const Eigen::Ref<const Eigen::MatrixXd>& data, const PcaModel& model) {
  if (data.cols() != model.dim()) {
    throw Error(ErrorCode::contract_violation, "projection input has dim " + std::to_string(data.cols()) +
                                                   ", model expects " + std::to_string(model.dim()));
  }
  return (data.rowwise() - model.mean.transpose()) * model.components;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::size_t export_plot_data(const Eigen::Ref<const Eigen::MatrixXd>& points, std::span<const std::string> labels,
                             std::ostream& out) {
  if (points.rows() > 0 && points.cols() != 2 && points.cols() != 3) {
    throw Error(ErrorCode::invalid_input, "plot data must have 2 or 3 columns");
  }
  if (static_cast<std::size_t>(points.rows()) != labels.size()) {
    throw Error(ErrorCode::invalid_input, "plot data has " + std::to_string(points.rows()) + " points but " +
                                              std::to_string(labels.size()) + " labels");
  }
  out << (points.cols() == 3 ? "agent,x,y,z\n" : "agent,x,y\n");
  out << std::setprecision(9);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    out << csv_field(labels[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < points.cols(); ++j) out << ',' << points(i, j);
    out << '\n';
  }
  return static_cast<std::size_t>(points.rows());
}

std::size_t export_plot_data(const Eigen::Ref<const Eigen::MatrixXd>& points, std::span<const std::string> labels,
                             const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::io_error, "cannot open '" + path.string() + "' for writing");
  const auto n = export_plot_data(points, labels, out);
  out.flush();
  if (!out) throw Error(ErrorCode::io_error, "failed writing '" + path.string() + "'");
  return n;
}

}  // namespace agentrec
