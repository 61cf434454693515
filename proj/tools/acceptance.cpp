// tools/acceptance.cpp

// Copyright 2026  The evec Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Acceptance runner. Prints one PASS/FAIL line per criterion:
//
//   1 exact-math oracles           5 metadata ordering
//   2 synthesis exactness          6 augmentation trend
//   3 training guarantees          7 WADA sanity
//   4 room verification trend
//
// Criteria 2 to 6 run the desk pipeline (configs/desk.ini defaults) for
// seeds 1, 2 and 3. Exit status is the number of failed criteria.
//
//   evec_acceptance [--report DIR] [--workers N]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "evec/evec.hpp"

namespace {

using namespace evec;

// ----------------------------------------------------------- tolerances

constexpr double kLdaResidualTol = 1e-6;      // relative generalized-eigen residual
constexpr double kLdaOracleTol = 1e-8;        // eigenvalues and directions vs dense solve
constexpr double kRidgeResidualTol = 1e-8;    // relative normal-equation residual
constexpr double kOlsTol = 1e-8;              // lambda = 0 vs least squares, relative
constexpr double kEerTol = 1e-9;              // EER vs brute-force sweep, percent
constexpr double kConvolveTol = 1e-9;         // FFT vs time-domain, absolute
constexpr double kSnrLabelTol = 0.01;         // dB
constexpr double kT60RelTol = 0.10;
constexpr double kSynthSeconds = 60.0;        // desk corpus synthesis budget
constexpr double kEmSlack = 1e-9;             // relative slack per EM step
constexpr double kGradTol = 1e-4;             // finite-difference agreement, relative
constexpr double kCompleteRoomEer = 10.0;     // percent, j = 20
constexpr double kBnSnrMae = 4.0;             // dB
constexpr double kBnT60Mae = 0.100;           // s
constexpr double kWadaTol = 2.0;              // dB
constexpr double kWadaGainTol = 1e-9;         // dB, gains that are not powers of two
constexpr int kMetadataJ = 20;
const std::vector<std::uint64_t> kSeeds{1, 2, 3};

struct Verdict {
  bool pass = true;
  std::string detail;
  void check(bool ok, const std::string &what) {
    pass = pass && ok;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [x]");
  }
};

std::string fmt(const char *f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Eigen::MatrixXd gaussian(Eigen::Index r, Eigen::Index c, std::mt19937_64 &rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

// ------------------------------------------------------------ criterion 1

// Scatter matrices by explicit loops over rooms and members.
void loop_scatter(const Eigen::MatrixXd &x, const std::vector<int> &labels, int R, Eigen::MatrixXd *sb,
                  Eigen::MatrixXd *sw) {
  const Eigen::Index M = x.cols();
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(M);
  for (Eigen::Index i = 0; i < x.rows(); ++i) mu += x.row(i).transpose();
  mu /= static_cast<double>(x.rows());
  *sb = Eigen::MatrixXd::Zero(M, M);
  *sw = Eigen::MatrixXd::Zero(M, M);
  for (int r = 0; r < R; ++r) {
    Eigen::VectorXd mr = Eigen::VectorXd::Zero(M);
    int n = 0;
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      if (labels[i] == r) {
        mr += x.row(i).transpose();
        ++n;
      }
    mr /= n;
    *sb += (mr - mu) * (mr - mu).transpose() / R;
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      if (labels[i] == r) {
        Eigen::VectorXd d = x.row(i).transpose() - mr;
        *sw += d * d.transpose() / (static_cast<double>(R) * n);
      }
  }
}

double direct_convolution_error(std::mt19937_64 &rng) {
  double worst = 0.0;
  for (auto [nx, nh] : {std::pair<int, int>{1, 1}, {17, 5}, {1000, 333}, {4096, 1500}}) {
    Eigen::MatrixXd a = gaussian(nx, 1, rng), b = gaussian(nh, 1, rng);
    std::vector<double> x(a.data(), a.data() + nx), h(b.data(), b.data() + nh);
    std::vector<double> fast = linear_convolve(x, h);
    for (int n = 0; n < nx + nh - 1; ++n) {
      double s = 0.0;
      for (int k = std::max(0, n - nh + 1); k <= std::min(n, nx - 1); ++k) s += x[k] * h[n - k];
      worst = std::max(worst, std::abs(s - fast[n]));
    }
  }
  return worst;
}

double brute_force_eer(const std::vector<TrialScore> &trials) {
  std::vector<double> thr{-INFINITY, INFINITY};
  for (const auto &t : trials) thr.push_back(t.score);
  std::sort(thr.begin(), thr.end());
  thr.erase(std::unique(thr.begin(), thr.end()), thr.end());
  double nt = 0, nn = 0;
  for (const auto &t : trials) (t.is_target ? nt : nn) += 1;
  double pa = 0, pr = 0;
  for (std::size_t k = 0; k < thr.size(); ++k) {
    double fa = 0, fr = 0;
    for (const auto &t : trials) {
      if (t.is_target && t.score < thr[k]) fr += 1;
      if (!t.is_target && t.score >= thr[k]) fa += 1;
    }
    fa /= nn;
    fr /= nt;
    if (k > 0 && fr >= fa) {
      double d = (fr - pr) - (fa - pa);
      double s = d == 0.0 ? 0.0 : (pa - pr) / d;
      return 100.0 * (pa + s * (fa - pa));
    }
    pa = fa;
    pr = fr;
  }
  return NAN;
}

Verdict criterion_exact_math(const TrainingLog &desk_log) {
  Verdict v;
  std::mt19937_64 rng(20260101);

  // LDA on synthetic labeled vectors: 30 rooms x 6 members in 12 dimensions.
  {
    const int R = 30, per = 6, M = 12, j = 8;
    Eigen::MatrixXd centers = 3.0 * gaussian(R, M, rng), x(R * per, M);
    std::vector<int> labels;
    for (int r = 0; r < R; ++r)
      for (int k = 0; k < per; ++k) {
        x.row(r * per + k) = centers.row(r) + gaussian(1, M, rng);
        labels.push_back(r);
      }
    Eigen::MatrixXd sb, sw;
    loop_scatter(x, labels, R, &sb, &sw);
    ScatterPair s = compute_scatter(x, labels);
    const double scatter_err = std::max((s.between - sb).norm() / sb.norm(), (s.within - sw).norm() / sw.norm());
    LdaModel lda = train_lda(s, j);
    Eigen::MatrixXd swt = sw;
    swt.diagonal().array() += 1e-6 * sw.trace() / M;
    double res = 0.0;
    for (int k = 0; k < j; ++k) {
      Eigen::VectorXd e = lda.projection.col(k), be = sb * e;
      res = std::max(res, (be - lda.eigenvalues(k) * swt * e).norm() / be.norm());
    }
    // Dense oracle: eigen-decomposition of the non-symmetric S_w^-1 S_b.
    Eigen::MatrixXd a = swt.fullPivLu().solve(sb);
    Eigen::EigenSolver<Eigen::MatrixXd> es(a);
    std::vector<std::pair<double, Eigen::VectorXd>> pairs;
    for (int k = 0; k < M; ++k) pairs.push_back({es.eigenvalues()(k).real(), es.eigenvectors().col(k).real()});
    std::sort(pairs.begin(), pairs.end(), [](auto &p, auto &q) { return p.first > q.first; });
    double eig_err = 0.0, dir_err = 0.0;
    for (int k = 0; k < j; ++k) {
      eig_err = std::max(eig_err, std::abs(pairs[k].first - lda.eigenvalues(k)) / pairs[k].first);
      Eigen::VectorXd o = pairs[k].second.normalized(), e = lda.projection.col(k).normalized();
      dir_err = std::max(dir_err, 1.0 - std::abs(o.dot(e)));
    }
    v.check(scatter_err <= kLdaOracleTol, "scatter vs loops " + fmt("%.1e", scatter_err));
    v.check(res <= kLdaResidualTol, "LDA residual " + fmt("%.1e", res));
    v.check(eig_err <= kLdaOracleTol && dir_err <= kLdaOracleTol,
            "LDA vs dense solve " + fmt("%.1e", std::max(eig_err, dir_err)));
    const double desk_res = desk_log.lda_residuals.maxCoeff();
    v.check(desk_res <= kLdaResidualTol, "desk LDA residual " + fmt("%.1e", desk_res));
  }

  // Ridge: normal equations and least squares at lambda = 0.
  {
    Eigen::MatrixXd x = gaussian(200, 15, rng);
    Eigen::VectorXd y = x * gaussian(15, 1, rng) + 0.3 * gaussian(200, 1, rng);
    y.array() += 4.0;
    double res = 0.0;
    for (double lambda : {0.01, 1.0, 100.0}) {
      RidgeModel m = train_ridge(x, y, lambda);
      Eigen::MatrixXd a(200, 16);
      a << x, Eigen::VectorXd::Ones(200);
      Eigen::MatrixXd g = a.transpose() * a;
      for (int i = 0; i < 15; ++i) g(i, i) += lambda;
      Eigen::VectorXd rhs = a.transpose() * y;
      res = std::max(res, (g * m.beta - rhs).norm() / rhs.norm());
    }
    RidgeModel ols = train_ridge(x, y, 0.0);
    Eigen::MatrixXd a(200, 16);
    a << x, Eigen::VectorXd::Ones(200);
    Eigen::VectorXd ls = a.colPivHouseholderQr().solve(y);
    const double ols_err = (ols.beta - ls).norm() / ls.norm();
    v.check(res <= kRidgeResidualTol, "ridge residual " + fmt("%.1e", res));
    v.check(ols_err <= kOlsTol, "OLS equality " + fmt("%.1e", ols_err));
  }

  // EER against the brute-force sweep, with and without ties, up to 1e4 trials.
  {
    double worst = 0.0;
    for (int rep = 0; rep < 8; ++rep) {
      std::uniform_int_distribution<int> size(50, 5000);
      std::normal_distribution<double> g(0.0, 1.0);
      std::uniform_int_distribution<int> coarse(0, 9);
      std::vector<TrialScore> t;
      int nt = size(rng), nn = size(rng);
      for (int i = 0; i < nt; ++i) t.push_back({"r", "x", rep % 2 ? coarse(rng) + 2.0 : g(rng) + 1.5, true});
      for (int i = 0; i < nn; ++i) t.push_back({"r", "y", rep % 2 ? coarse(rng) : g(rng), false});
      worst = std::max(worst, std::abs(compute_eer(t) - brute_force_eer(t)));
    }
    v.check(worst <= kEerTol, "EER vs sweep " + fmt("%.1e", worst));
  }

  const double conv = direct_convolution_error(rng);
  v.check(conv <= kConvolveTol, "FFT convolution " + fmt("%.1e", conv));
  return v;
}

// ------------------------------------------------------------ criterion 3

bool non_decreasing(const std::vector<double> &v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] < v[i - 1] - kEmSlack * std::abs(v[i - 1])) return false;
  return !v.empty();
}

double bottleneck_gradient_error(std::mt19937_64 &rng) {
  double worst = 0.0;
  for (int rep = 0; rep < 5; ++rep) {
    const int M = 4 + rep, B = 7;
    BottleneckNet net = BottleneckNet::zeros(M);
    for (int l = 0; l < kBottleneckLayers; ++l) {
      net.weights[l] = 0.7 * gaussian(net.weights[l].rows(), net.weights[l].cols(), rng);
      net.biases[l] = 0.3 * gaussian(net.biases[l].size(), 1, rng);
    }
    Eigen::MatrixXd z = gaussian(M, B, rng);
    Eigen::VectorXd y = gaussian(B, 1, rng);
    NetGradient grad;
    bottleneck_loss(net, z, y, &grad);
    Eigen::VectorXd analytic = flatten_parameters(grad.weights, grad.biases);
    Eigen::VectorXd p = flatten_parameters(net.weights, net.biases);
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      BottleneckNet plus = net, minus = net;
      Eigen::VectorXd pp = p, pm = p;
      pp(i) += h;
      pm(i) -= h;
      unflatten_parameters(pp, plus);
      unflatten_parameters(pm, minus);
      const double numeric = (bottleneck_loss(plus, z, y, nullptr) - bottleneck_loss(minus, z, y, nullptr)) / (2 * h);
      const double scale = std::abs(analytic(i)) + std::abs(numeric);
      // Entries whose true value is zero (dead units) are compared absolutely.
      worst = std::max(worst, std::abs(analytic(i) - numeric) / std::max(scale, 1e-4));
    }
  }
  return worst;
}

// ------------------------------------------------------------ criterion 7

AudioClip gamma_mix(double snr_db, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::gamma_distribution<double> gamma(kWadaGammaShape, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::bernoulli_distribution sign(0.5);
  std::vector<double> s(n), v(n);
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = sign(rng) ? gamma(rng) : -gamma(rng);
    v[i] = gauss(rng);
  }
  double ps = 0, pn = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ps += s[i] * s[i];
    pn += v[i] * v[i];
  }
  const double a = std::sqrt(pn / ps * std::pow(10.0, snr_db / 10.0));
  AudioClip c;
  c.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) c.samples[i] = a * s[i] + v[i];
  return c;
}

Verdict criterion_wada(const WadaTable &table) {
  Verdict v;
  for (double snr : {0.0, 10.0, 20.0}) {
    double est = wada_estimate(gamma_mix(snr, 160000, 4242 + static_cast<std::uint64_t>(snr)), table);
    v.check(std::abs(est - snr) <= kWadaTol, fmt("%.0f dB", snr) + " -> " + fmt("%.2f", est));
  }
  AudioClip c = gamma_mix(8.0, 48000, 99);
  const double base = wada_estimate(c, table);
  bool exact = true;
  double drift = 0.0;
  for (double gain : {0.125, 0.5, 2.0, 64.0, 1e-3, 0.3, 7.0}) {
    AudioClip s = c;
    for (double &x : s.samples) x *= gain;
    const double e = wada_estimate(s, table);
    if (std::ldexp(1.0, std::ilogb(gain)) == gain)
      exact = exact && e == base;
    else
      drift = std::max(drift, std::abs(e - base));
  }
  v.check(exact, "power-of-two gains bit-identical");
  v.check(drift <= kWadaGainTol, "other gains " + fmt("%.1e", drift) + " dB");
  return v;
}

// -------------------------------------------------------------- statistics

double mean_of(const std::vector<double> &v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

double sample_std(const std::vector<double> &v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return v.size() > 1 ? std::sqrt(s / (v.size() - 1)) : 0.0;
}

void print(int id, const std::string &name, const Verdict &v) {
  std::cout << (v.pass ? "PASS" : "FAIL") << " " << id << " " << name << ": " << v.detail << std::endl;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"evec acceptance criteria"};
  std::string report_dir;
  int workers = 1;
  app.add_option("--report", report_dir, "write the 3-seed reports here");
  app.add_option("--workers", workers, "worker threads")->check(CLI::Range(1, 1024));
  CLI11_PARSE(app, argc, argv);

  try {
    std::vector<EvalReport> reports;
    std::vector<SynthesisCheck> checks;
    std::vector<double> synth_seconds;
    std::vector<TrainingLog> logs;
    std::string determinism;
    bool deterministic = true;
    PipelineConfig cfg;
    for (std::uint64_t seed : kSeeds) {
      cfg = PipelineConfig();
      cfg.set_seed(seed);
      cfg.validate();
      auto t0 = std::chrono::steady_clock::now();
      SynthesisCheck chk;
      std::vector<Utterance> utts = synthesize_utterances(cfg, workers, &chk);
      synth_seconds.push_back(seconds_since(t0));
      checks.push_back(chk);
      TrainingLog log;
      ModelSet models = train_models(utts, cfg, workers, &log);
      if (seed == kSeeds.front()) {
        ModelSet again = train_models(utts, cfg, workers);
        auto same = [&](const std::string &a, const std::string &b, const std::string &name) {
          if (a != b) {
            deterministic = false;
            determinism += " " + name;
          }
        };
        same(encode_gmm(models.ubm), encode_gmm(again.ubm), "ubm");
        same(encode_tmatrix(models.tmatrix), encode_tmatrix(again.tmatrix), "tmatrix");
        same(encode_lda(models.lda), encode_lda(again.lda), "lda");
        for (int j : cfg.j_list) {
          same(encode_plda(models.plda.at(j)), encode_plda(again.plda.at(j)), "plda");
          const Estimators &a = models.estimators.at(j), &b = again.estimators.at(j);
          same(encode_ridge(a.ridge_snr) + encode_ridge(a.ridge_t60), encode_ridge(b.ridge_snr) + encode_ridge(b.ridge_t60),
               "ridge");
          same(encode_bottleneck(a.bn_snr) + encode_bottleneck(a.bn_t60),
               encode_bottleneck(b.bn_snr) + encode_bottleneck(b.bn_t60), "bottleneck");
        }
        same(encode_wada_table(models.wada), encode_wada_table(again.wada), "wada");
      }
      reports.push_back(evaluate(utts, models, cfg, workers));
      logs.push_back(std::move(log));
      std::cerr << "seed " << seed << " done" << std::endl;
    }
    if (!report_dir.empty()) {
      write_reports(report_dir, reports, cfg);
      std::cerr << headline_table(reports, cfg);
    }
    const ReportSummary sum(reports);
    int failures = 0;
    auto emit = [&](int id, const std::string &name, const Verdict &v) {
      print(id, name, v);
      failures += !v.pass;
    };

    emit(1, "exact-math oracles", criterion_exact_math(logs.front()));

    {
      Verdict v;
      double snr = 0, t60 = 0, secs = 0;
      for (std::size_t i = 0; i < checks.size(); ++i) {
        snr = std::max(snr, checks[i].max_snr_error_db);
        t60 = std::max(t60, checks[i].max_t60_rel_error);
        secs = std::max(secs, synth_seconds[i]);
      }
      v.check(snr <= kSnrLabelTol, "max SNR label error " + fmt("%.2e", snr) + " dB");
      v.check(t60 <= kT60RelTol, "max T60 relative error " + fmt("%.2e", t60));
      v.check(secs <= kSynthSeconds, "synthesis + front end " + fmt("%.1f", secs) + " s per seed");
      emit(2, "synthesis exactness", v);
    }

    {
      Verdict v;
      bool ubm = true, tm = true;
      for (const TrainingLog &l : logs) {
        ubm = ubm && non_decreasing(l.ubm_loglik);
        tm = tm && non_decreasing(l.tmatrix_objective);
      }
      std::mt19937_64 rng(77);
      const double grad = bottleneck_gradient_error(rng);
      v.check(ubm, "UBM log-likelihood non-decreasing");
      v.check(tm, "T-matrix objective non-decreasing");
      v.check(grad <= kGradTol, "bottleneck gradient " + fmt("%.1e", grad));
      v.check(deterministic, "retrained model files identical" + determinism);
      emit(3, "training guarantees", v);
    }

    {
      Verdict v;
      const double cr = sum.eer(RoomType::kCompleteRoom, 20);
      v.check(cr <= kCompleteRoomEer, "complete_room EER(j=20) " + fmt("%.2f", cr) + "%");
      std::vector<double> by_j;
      std::string series;
      for (int j : cfg.j_list) {
        double m = 0;
        for (RoomType t : cfg.room_types) m += sum.eer(t, j);
        by_j.push_back(m / cfg.room_types.size());
        series += (series.empty() ? "" : " ") + fmt("%.2f", by_j.back());
      }
      bool mono = true;
      for (std::size_t k = 1; k < by_j.size(); ++k) mono = mono && by_j[k] <= by_j[k - 1];
      v.check(mono, "mean EER over types at j=5,10,20: " + series);
      emit(4, "room verification trend", v);
    }

    {
      Verdict v;
      auto avg = [&](TargetKind k, const char *est) {
        double m = 0;
        for (RoomType t : cfg.room_types) m += sum.mae(t, kMetadataJ, k, est);
        return m / cfg.room_types.size();
      };
      const double bn = avg(TargetKind::kSnrDb, "bn"), rr = avg(TargetKind::kSnrDb, "ridge"),
                   wada = avg(TargetKind::kSnrDb, "wada"), mean = avg(TargetKind::kSnrDb, "mean");
      v.check(bn <= rr && rr <= wada,
              "SNR MAE bn " + fmt("%.2f", bn) + " <= ridge " + fmt("%.2f", rr) + " <= wada " + fmt("%.2f", wada));
      v.check(bn <= kBnSnrMae, "SNR bn " + fmt("%.2f", bn) + " dB (mean predictor " + fmt("%.2f", mean) + ")");
      const double tbn = avg(TargetKind::kT60S, "bn"), trr = avg(TargetKind::kT60S, "ridge"),
                   tmean = avg(TargetKind::kT60S, "mean");
      v.check(tbn <= trr, "T60 MAE bn " + fmt("%.3f", tbn) + " <= ridge " + fmt("%.3f", trr));
      v.check(tbn <= kBnT60Mae, "T60 bn " + fmt("%.3f", tbn) + " s (mean predictor " + fmt("%.3f", tmean) + ")");
      emit(5, "metadata ordering", v);
    }

    {
      Verdict v;
      for (RoomType t : cfg.room_types) {
        const double none = sum.augmented_eer(t, cfg.augment_j, "none");
        const double both = sum.augmented_eer(t, cfg.augment_j, "snr_t60");
        v.check(both <= none, to_string(t) + " " + fmt("%.2f", both) + " <= " + fmt("%.2f", none));
      }
      for (RoomType t : cfg.room_types) {
        const std::vector<double> &none = sum.augmented_eer_seeds(t, cfg.augment_j, "none");
        const double delta =
            std::abs(sum.augmented_eer(t, cfg.augment_j, "constant") - sum.augmented_eer(t, cfg.augment_j, "none"));
        const double sd = sample_std(none);
        v.check(delta <= sd, "control " + to_string(t) + " |d| " + fmt("%.2f", delta) + " <= sd " + fmt("%.2f", sd));
      }
      emit(6, "augmentation trend", v);
    }

    {
      WadaTableOptions opt;
      opt.seed = 1;
      opt.workers = workers;
      emit(7, "WADA sanity", criterion_wada(build_wada_table(opt)));
    }
    std::cout << "acceptance complete: " << 7 - failures << " of 7 criteria pass" << std::endl;
    return failures;
  } catch (const Error &e) {
    std::cout << "FAIL acceptance aborted: " << e.what() << std::endl;
    return 100;
  }
}
