#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "agentrec/error.hpp"
#include "agentrec/projection.hpp"
#include "support/oracles.hpp"

using namespace agentrec;

namespace {

Eigen::MatrixXd gaussian(std::mt19937_64& rng, Eigen::Index m, Eigen::Index n) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd out(m, n);
  for (Eigen::Index i = 0; i < out.size(); ++i) out.data()[i] = g(rng);
  return out;
}

// 10-D data with well separated variances along a random rotation.
Eigen::MatrixXd anisotropic(std::mt19937_64& rng, Eigen::Index m) {
  Eigen::VectorXd scale(10);
  scale << 5.0, 3.5, 2.5, 1.8, 1.3, 1.0, 0.8, 0.6, 0.4, 0.2;
  const Eigen::MatrixXd rot = gaussian(rng, 10, 10).householderQr().householderQ();
  return (gaussian(rng, m, 10) * scale.asDiagonal()) * rot.transpose() + Eigen::MatrixXd::Constant(m, 10, 3.0);
}

void expect_invariants(const PcaModel& model) {
  const auto d = model.rank();
  EXPECT_LE((model.components.transpose() * model.components - Eigen::MatrixXd::Identity(d, d)).cwiseAbs().maxCoeff(),
            1e-8);
  for (Eigen::Index i = 0; i < d; ++i) {
    EXPECT_GE(model.eigenvalues[i], 0.0);
    if (i) EXPECT_GE(model.eigenvalues[i - 1], model.eigenvalues[i]);
    Eigen::Index arg = 0;
    model.components.col(i).cwiseAbs().maxCoeff(&arg);
    EXPECT_GT(model.components(arg, i), 0.0);
  }
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no agentrec::Error thrown";
  return ErrorCode::not_found;
}

}  // namespace

TEST(Pca, MatchesDenseEigensolver) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::MatrixXd data = anisotropic(rng, 400);
    const auto ref = oracle::dense_pca(data);
    for (int d : {2, 3}) {
      const PcaModel model = fit_pca(data, d);
      expect_invariants(model);
      for (int i = 0; i < d; ++i) {
        EXPECT_NEAR(model.eigenvalues[i], ref.eigenvalues[i], 1e-6);
        EXPECT_LE((model.components.col(i) - ref.eigenvectors.col(i)).cwiseAbs().maxCoeff(), 1e-6);
      }
    }
  }
}

TEST(Pca, RankTwoPlaneIn768D) {
  std::mt19937_64 rng(4);
  const Eigen::MatrixXd basis = gaussian(rng, 768, 2).householderQr().householderQ() * Eigen::MatrixXd::Identity(768, 2);
  const Eigen::MatrixXd coords = gaussian(rng, 200, 2) * Eigen::Vector2d(3.0, 1.0).asDiagonal();
  const Eigen::MatrixXd data = coords * basis.transpose();
  const PcaModel model = fit_pca(data, 3);
  expect_invariants(model);
  EXPECT_GT(model.eigenvalues[0], 0.0);
  EXPECT_GT(model.eigenvalues[1], 0.0);
  EXPECT_NEAR(model.eigenvalues[2], 0.0, 1e-8);
}

TEST(Pca, IsotropicDataRecoversSigmaSquared) {
  std::mt19937_64 rng(5);
  const double sigma = 1.7;
  const Eigen::MatrixXd data = gaussian(rng, 100000, 10) * sigma;
  const PcaModel model = fit_pca(data, 3);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(model.eigenvalues[i] / (sigma * sigma), 1.0, 0.05);
}

TEST(Pca, ProjectionExamples) {
  std::mt19937_64 rng(6);
  const Eigen::MatrixXd data = anisotropic(rng, 300);
  const PcaModel model = fit_pca(data, 3);

  const Eigen::MatrixXd at_mean = project(model.mean.transpose(), model);
  EXPECT_LE(at_mean.cwiseAbs().maxCoeff(), 1e-12);
  for (int j = 0; j < 3; ++j) {
    const Eigen::MatrixXd p = project((model.mean + model.components.col(j)).transpose(), model);
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(p(0, c), c == j ? 1.0 : 0.0, 1e-12);
  }

  const Eigen::MatrixXd pts = project(data, model);
  for (int j = 0; j < 3; ++j) {
    const Eigen::VectorXd col = pts.col(j);
    const double var = (col.array() - col.mean()).square().sum() / double(col.size() - 1);
    EXPECT_NEAR(var, model.eigenvalues[j], 1e-6);
  }
  EXPECT_EQ(code_of([&] { project(Eigen::MatrixXd::Zero(2, 9), model); }), ErrorCode::contract_violation);
}

TEST(Pca, VarianceMaximality) {
  std::mt19937_64 rng(7);
  const Eigen::MatrixXd data = anisotropic(rng, 500);
  const PcaModel model = fit_pca(data, 2);
  const Eigen::MatrixXd centered = data.rowwise() - model.mean.transpose();
  for (int t = 0; t < 100; ++t) {
    Eigen::VectorXd u = gaussian(rng, 10, 1);
    u.normalize();
    const Eigen::VectorXd proj = centered * u;
    EXPECT_LE(proj.squaredNorm() / double(data.rows() - 1), model.eigenvalues[0] + 1e-6);
  }
}

TEST(Pca, ProjectionLinearity) {
  std::mt19937_64 rng(8);
  const Eigen::MatrixXd data = anisotropic(rng, 100);
  const PcaModel model = fit_pca(data, 2);
  const Eigen::MatrixXd a = anisotropic(rng, 20);
  const Eigen::MatrixXd b = anisotropic(rng, 20);
  for (double alpha : {0.0, 0.3, 0.5, 1.0}) {
    const Eigen::MatrixXd lhs = project(alpha * a + (1 - alpha) * b, model);
    const Eigen::MatrixXd rhs = alpha * project(a, model) + (1 - alpha) * project(b, model);
    EXPECT_LE((lhs - rhs).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Pca, Errors) {
  EXPECT_EQ(code_of([] { fit_pca(Eigen::MatrixXd::Ones(2, 5), 2); }), ErrorCode::invalid_input);
  EXPECT_EQ(code_of([] { fit_pca(Eigen::MatrixXd::Ones(10, 5), 4); }), ErrorCode::invalid_input);
  std::mt19937_64 rng(1);
  PcaOptions starved;
  starved.max_iterations = 1;
  try {
    fit_pca(anisotropic(rng, 50), 2, starved);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::numerical_error);
    EXPECT_NE(std::string(e.what()).find("residual"), std::string::npos) << e.what();
  }
}

TEST(PlotData, CsvShapesAndRoundtrip) {
  std::mt19937_64 rng(9);
  const Eigen::MatrixXd pts = gaussian(rng, 25, 3) * 123.456;
  std::vector<std::string> labels;
  for (int i = 0; i < 25; ++i) labels.push_back(i % 2 ? "agent,with comma" : "plain");
  std::stringstream out;
  EXPECT_EQ(export_plot_data(pts, labels, out), 25U);

  std::string line;
  std::getline(out, line);
  EXPECT_EQ(line, "agent,x,y,z");
  for (Eigen::Index i = 0; i < 25; ++i) {
    ASSERT_TRUE(std::getline(out, line));
    std::string label;
    std::size_t at = 0;
    if (line[0] == '"') {
      const auto close = line.find('"', 1);
      label = line.substr(1, close - 1);
      at = close + 2;
    } else {
      at = line.find(',') + 1;
      label = line.substr(0, at - 1);
    }
    EXPECT_EQ(label, labels[static_cast<std::size_t>(i)]);
    std::stringstream nums(line.substr(at));
    std::string cell;
    for (Eigen::Index c = 0; c < 3; ++c) {
      std::getline(nums, cell, ',');
      const double v = std::stod(cell);
      EXPECT_LE(std::abs(v - pts(i, c)), 1e-8 * std::max(1.0, std::abs(pts(i, c))));
    }
  }

  std::stringstream two;
  export_plot_data(pts.leftCols(2), labels, two);
  std::getline(two, line);
  EXPECT_EQ(line, "agent,x,y");
  std::getline(two, line);
  EXPECT_EQ(std::count(line.begin(), line.end(), ','), 2);

  std::stringstream empty;
  EXPECT_EQ(export_plot_data(Eigen::MatrixXd(0, 2), std::vector<std::string>{}, empty), 0U);
  EXPECT_EQ(empty.str(), "agent,x,y\n");
  EXPECT_EQ(code_of([&] { export_plot_data(pts, std::vector<std::string>{"x"}, empty); }), ErrorCode::invalid_input);
  EXPECT_EQ(code_of([&] { export_plot_data(pts, labels, std::filesystem::path("/nonexistent/dir/x.csv")); }),
            ErrorCode::io_error);
}
