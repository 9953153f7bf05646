#pragma once

// SPM learners. Every learner alternates select() and observe(): select()
// emits the round's distribution p_t and samples I_t from the learner's own
// stream, observe() consumes the loss of I_t and runs the rest of the loop
// body. record() exposes the full state of the last round.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "spm/errors.hpp"
#include "spm/reservoir.hpp"
#include "spm/rng.hpp"
#include "spm/simplex.hpp"
#include "spm/spm.hpp"

namespace spm {

enum class LearnerId { kAlg1, kAlg3, kAlg4, kAlg5, kExp3 };

inline const char* to_string(LearnerId id) {
  switch (id) {
    case LearnerId::kAlg1: return "alg1";
    case LearnerId::kAlg3: return "alg3";
    case LearnerId::kAlg4: return "alg4";
    case LearnerId::kAlg5: return "alg5";
    case LearnerId::kExp3: return "exp3";
  }
  return "unknown";
}

inline LearnerId learner_from_string(const std::string& s) {
  if (s == "alg1") return LearnerId::kAlg1;
  if (s == "alg3") return LearnerId::kAlg3;
  if (s == "alg4") return LearnerId::kAlg4;
  if (s == "alg5" || s == "alg6") return LearnerId::kAlg5;
  if (s == "exp3") return LearnerId::kExp3;
  throw ConfigError("unknown learner '" + s + "'");
}

struct RoundRecord {
  long long t = 0;
  ProbVector q;
  ProbVector p;
  int arm = -1;
  double loss = 0.0;
  // Scalar-rate learners store one entry; the coordinate-wise learner K.
  std::vector<double> beta;
  std::vector<double> beta_next;
  std::vector<double> z;
  std::vector<double> h;
  std::vector<double> lhat;
  std::vector<double> m;
  std::vector<char> active;
  bool reservoir_round = false;
  bool degenerate_penalty = false;
};

inline constexpr int kCheckpointVersion = 1;

class Learner {
 public:
  Learner(const SpmConfig& cfg, std::uint64_t seed) : cfg_(cfg), rng_(seed) {
    cfg_.validate();
  }
  virtual ~Learner() = default;

  virtual LearnerId id() const = 0;
  virtual LossRange loss_range() const = 0;

  // Computes p_t and samples I_t. The sleeping learner requires the active
  // set; the others ignore it.
  int select(const std::vector<char>* active = nullptr) {
    if (pending_) throw Error("select() called twice without observe()");
    ++t_;
    rec_.t = t_;
    rec_.degenerate_penalty = false;
    rec_.reservoir_round = false;
    do_select(active);
    pending_ = true;
    return rec_.arm;
  }

  void observe(int arm, double loss) {
    if (!pending_) throw Error("observe() without a preceding select()");
    check_outcome(arm);
    check_loss(loss, loss_range());
    rec_.loss = loss;
    do_update(loss);
    pending_ = false;
  }

  const RoundRecord& record() const { return rec_; }
  const SpmConfig& config() const { return cfg_; }
  long long round() const { return t_; }
  const Rng& rng() const { return rng_; }

  nlohmann::json checkpoint() const {
    if (pending_) throw Error("checkpoints are taken between rounds");
    nlohmann::json j;
    j["format"] = "spm-learner-checkpoint";
    j["version"] = kCheckpointVersion;
    j["algorithm"] = to_string(id());
    j["config"] = {{"K", cfg_.K},         {"T", cfg_.T},
                   {"alpha", cfg_.alpha}, {"beta1", cfg_.beta1},
                   {"gamma", cfg_.gamma}, {"d", cfg_.d}};
    j["round"] = t_;
    j["rng"] = {{"key", rng_.key()}, {"counter", rng_.counter()}};
    j["solver"] = {{"x", solver_.last()}, {"lambda", solver_.lambda()},
                   {"warm", solver_.warm()}};
    save_state(j["state"]);
    return j;
  }

  void restore(const nlohmann::json& j) {
    if (j.value("format", "") != "spm-learner-checkpoint")
      throw ConfigError("not a learner checkpoint");
    if (j.at("version").get<int>() != kCheckpointVersion)
      throw ConfigError("unsupported checkpoint version");
    if (j.at("algorithm").get<std::string>() != to_string(id()))
      throw ConfigError("checkpoint belongs to a different algorithm");
    const auto& c = j.at("config");
    if (c.at("K").get<int>() != cfg_.K || c.at("T").get<long long>() != cfg_.T ||
        c.at("alpha").get<double>() != cfg_.alpha ||
        c.at("beta1").get<double>() != cfg_.beta1 ||
        c.at("gamma").get<double>() != cfg_.gamma || c.at("d").get<double>() != cfg_.d)
      throw ConfigError("checkpoint configuration differs from this learner");
    t_ = j.at("round").get<long long>();
    rng_ = Rng(j.at("rng").at("key").get<std::uint64_t>(),
               j.at("rng").at("counter").get<std::uint64_t>());
    const auto& s = j.at("solver");
    solver_.reset();
    if (s.at("warm").get<bool>())
      solver_.restore(s.at("x").get<std::vector<double>>(), s.at("lambda").get<double>());
    load_state(j.at("state"));
    pending_ = false;
  }

 protected:
  virtual void do_select(const std::vector<char>* active) = 0;
  virtual void do_update(double loss) = 0;
  virtual void save_state(nlohmann::json& s) const = 0;
  virtual void load_state(const nlohmann::json& s) = 0;

  virtual void check_outcome(int arm) const {
    if (arm != rec_.arm)
      throw Error("observed arm " + std::to_string(arm) + " differs from sampled arm " +
                  std::to_string(rec_.arm));
  }

  std::size_t k() const { return static_cast<std::size_t>(cfg_.K); }

  const ProbVector& solve(const std::vector<double>& offsets,
                          const std::vector<double>& betas, PotentialKind kind) {
    problem_.offsets = offsets;
    problem_.potentials.resize(k());
    for (std::size_t i = 0; i < k(); ++i)
      problem_.potentials[i] = {kind, betas.size() == 1 ? betas[0] : betas[i],
                                cfg_.gamma, cfg_.alpha};
    return solver_.solve(problem_);
  }

  // The beta update with the degenerate-penalty guard: skip and flag.
  double guarded_update(double beta, double z, double h) {
    if (!(h > 1e-14)) {
      rec_.degenerate_penalty = true;
      return beta;
    }
    return spm_update_beta(beta, z, h);
  }

  SpmConfig cfg_;
  Rng rng_;
  RoundRecord rec_;
  long long t_ = 0;
  bool pending_ = false;
  FtrlSolver solver_;
  FtrlProblem problem_;
};

// alg1: FTRL with the Tsallis + log-barrier hybrid, importance-weighted
// estimates and one scalar SPM rate. Losses in [-1,1].
class Alg1Learner final : public Learner {
 public:
  Alg1Learner(const SpmConfig& cfg, std::uint64_t seed)
      : Learner(cfg, seed), L_(k(), 0.0), beta_(cfg.beta1) {}

  LearnerId id() const override { return LearnerId::kAlg1; }
  LossRange loss_range() const override { return LossRange::kSigned; }
  const std::vector<double>& cumulative_estimates() const { return L_; }
  double beta() const { return beta_; }

 protected:
  void do_select(const std::vector<char>*) override {
    rec_.q = solve(L_, {beta_}, PotentialKind::kTsallisLogBarrier);
    rec_.p = mix_exploration(rec_.q, cfg_.K, cfg_.T);
    rec_.arm = sample_arm(rec_.p, rng_.uniform());
    rec_.beta = {beta_};
  }

  void do_update(double loss) override {
    const auto arm = static_cast<std::size_t>(rec_.arm);
    const double p_arm = rec_.p[arm];
    rec_.lhat.assign(k(), 0.0);
    rec_.lhat[arm] = estimate_loss_iw(loss, p_arm, true);
    L_[arm] += rec_.lhat[arm];
    const double z = spm_z_sparse(p_arm, rec_.lhat[arm], loss, beta_, cfg_);
    const double h = spm_h_tsallis(rec_.p, cfg_.alpha);
    beta_ = guarded_update(beta_, z, h);
    rec_.z = {z};
    rec_.h = {h};
    rec_.beta_next = {beta_};
  }

  void save_state(nlohmann::json& s) const override {
    s["L"] = L_;
    s["beta"] = beta_;
  }
  void load_state(const nlohmann::json& s) override {
    L_ = s.at("L").get<std::vector<double>>();
    beta_ = s.at("beta").get<double>();
  }

 private:
  std::vector<double> L_;
  double beta_;
};

// alg5/alg6: optimistic FTRL whose predictions are per-arm reservoir means.
// Reservoir rounds are drawn with probability min(K ceil(ln T) / t, 1).
class Alg5Learner final : public Learner {
 public:
  Alg5Learner(const SpmConfig& cfg, std::uint64_t seed)
      : Learner(cfg, seed),
        L_(k(), 0.0),
        m_(k(), 0.0),
        beta_(cfg.beta1),
        log_factor_(ceil_log(cfg.T)),
        reservoirs_(k(), Reservoir{reservoir_capacity(cfg.T), {}, 0.0}) {}

  LearnerId id() const override { return LearnerId::kAlg5; }
  LossRange loss_range() const override { return LossRange::kUnit; }
  const std::vector<Reservoir>& reservoirs() const { return reservoirs_; }
  const std::vector<double>& prediction() const { return m_; }
  double beta() const { return beta_; }

 protected:
  void do_select(const std::vector<char>*) override {
    rec_.beta = {beta_};
    rec_.m = m_;
    const double prob =
        reservoir_probability(t_, cfg_.K, static_cast<double>(log_factor_));
    if (rng_.uniform() < prob) {
      rec_.reservoir_round = true;
      if (t_ <= static_cast<long long>(cfg_.K * log_factor_)) {
        phase_ = ReservoirPhase::kFill;
        rec_.arm = static_cast<int>(t_ % cfg_.K);
        rec_.p.assign(k(), 0.0);
        rec_.p[static_cast<std::size_t>(rec_.arm)] = 1.0;
      } else {
        phase_ = ReservoirPhase::kReplace;
        rec_.arm = static_cast<int>(rng_.below(k()));
        rec_.p.assign(k(), 1.0 / static_cast<double>(k()));
      }
      rec_.q = rec_.p;
      return;
    }
    std::vector<double> offsets(k());
    for (std::size_t i = 0; i < k(); ++i) offsets[i] = m_[i] + L_[i];
    rec_.q = solve(offsets, {beta_}, PotentialKind::kTsallisLogBarrier);
    rec_.p = mix_exploration(rec_.q, cfg_.K, cfg_.T);
    rec_.arm = sample_arm(rec_.p, rng_.uniform());
  }

  void do_update(double loss) override {
    const auto arm = static_cast<std::size_t>(rec_.arm);
    if (rec_.reservoir_round) {
      const double u = phase_ == ReservoirPhase::kReplace ? rng_.uniform() : 0.0;
      reservoir_insert_inplace(reservoirs_[arm], loss, phase_, u);
      for (std::size_t i = 0; i < k(); ++i) m_[i] = reservoirs_[i].mean;
      rec_.lhat.assign(k(), 0.0);
      rec_.z = {0.0};
      rec_.h = {0.0};
      rec_.beta_next = {beta_};
      return;
    }
    rec_.lhat.resize(k());
    for (std::size_t i = 0; i < k(); ++i) {
      rec_.lhat[i] = estimate_loss_optimistic(loss, m_[i], rec_.p[i], i == arm);
      L_[i] += rec_.lhat[i];
    }
    const double z = spm_z_sparse(rec_.p[arm], rec_.lhat[arm] - m_[arm],
                                  loss - m_[arm], beta_, cfg_);
    const double h = spm_h_tsallis(rec_.p, cfg_.alpha);
    beta_ = guarded_update(beta_, z, h);
    rec_.z = {z};
    rec_.h = {h};
    rec_.beta_next = {beta_};
  }

  void save_state(nlohmann::json& s) const override {
    s["L"] = L_;
    s["m"] = m_;
    s["beta"] = beta_;
    nlohmann::json res = nlohmann::json::array();
    for (const auto& r : reservoirs_)
      res.push_back({{"capacity", r.capacity}, {"samples", r.samples}});
    s["reservoirs"] = res;
  }
  void load_state(const nlohmann::json& s) override {
    L_ = s.at("L").get<std::vector<double>>();
    m_ = s.at("m").get<std::vector<double>>();
    beta_ = s.at("beta").get<double>();
    const auto& res = s.at("reservoirs");
    for (std::size_t i = 0; i < k(); ++i) {
      auto& r = reservoirs_[i];
      r.capacity = res.at(i).at("capacity").get<std::size_t>();
      r.samples = res.at(i).at("samples").get<std::vector<double>>();
      double sum = 0.0;
      for (double v : r.samples) sum += v;
      r.mean = r.samples.empty() ? 0.0 : sum / static_cast<double>(r.samples.size());
    }
  }

 private:
  std::vector<double> L_;
  std::vector<double> m_;
  double beta_;
  std::size_t log_factor_;
  std::vector<Reservoir> reservoirs_;
  ReservoirPhase phase_ = ReservoirPhase::kFill;
};

// alg3: coordinate-wise rates with the hybrid regularizer whose
// coordinates carry (1-x) ln(1-x) + x, and the running-mean predictor.
class Alg3Learner final : public Learner {
 public:
  Alg3Learner(const SpmConfig& cfg, std::uint64_t seed)
      : Learner(cfg, seed),
        L_(k(), 0.0),
        beta_(k(), cfg.beta1),
        pulls_(k(), 0),
        sums_(k(), 0.0),
        m_(k(), 0.5) {}

  LearnerId id() const override { return LearnerId::kAlg3; }
  LossRange loss_range() const override { return LossRange::kUnit; }
  const std::vector<double>& beta() const { return beta_; }

 protected:
  void do_select(const std::vector<char>*) override {
    std::vector<double> offsets(k());
    for (std::size_t i = 0; i < k(); ++i) {
      m_[i] = cow_predictor(pulls_[i], sums_[i]);
      offsets[i] = m_[i] + L_[i];
    }
    rec_.m = m_;
    rec_.q = solve(offsets, beta_, PotentialKind::kCoordinateWiseHybrid);
    rec_.p = mix_exploration(rec_.q, cfg_.K, cfg_.T);
    rec_.arm = sample_arm(rec_.p, rng_.uniform());
    rec_.beta = beta_;
    rec_.h.resize(k());
    for (std::size_t i = 0; i < k(); ++i)
      rec_.h[i] = std::pow(rec_.p[i], cfg_.alpha) / cfg_.alpha;
  }

  void do_update(double loss) override {
    const auto arm = static_cast<std::size_t>(rec_.arm);
    rec_.lhat.resize(k());
    for (std::size_t i = 0; i < k(); ++i) {
      rec_.lhat[i] = estimate_loss_optimistic(loss, m_[i], rec_.p[i], i == arm);
      L_[i] += rec_.lhat[i];
    }
    rec_.z.assign(k(), 0.0);
    rec_.z[arm] = spm_z_coordinate(rec_.p[arm], loss, m_[arm], beta_[arm], cfg_);
    beta_[arm] = guarded_update(beta_[arm], rec_.z[arm], rec_.h[arm]);
    rec_.beta_next = beta_;
    ++pulls_[arm];
    sums_[arm] += loss;
  }

  void save_state(nlohmann::json& s) const override {
    s["L"] = L_;
    s["beta"] = beta_;
    s["pulls"] = pulls_;
    s["loss_sums"] = sums_;
  }
  void load_state(const nlohmann::json& s) override {
    L_ = s.at("L").get<std::vector<double>>();
    beta_ = s.at("beta").get<std::vector<double>>();
    pulls_ = s.at("pulls").get<std::vector<long long>>();
    sums_ = s.at("loss_sums").get<std::vector<double>>();
  }

 private:
  std::vector<double> L_;
  std::vector<double> beta_;
  std::vector<long long> pulls_;
  std::vector<double> sums_;
  std::vector<double> m_;
};

// alg4: sleeping bandits. FTRL runs on estimated cumulative regrets
// and the emitted distribution is q restricted to the active set.
class Alg4Learner final : public Learner {
 public:
  Alg4Learner(const SpmConfig& cfg, std::uint64_t seed)
      : Learner(cfg, seed), R_(k(), 0.0), beta_(cfg.beta1) {}

  LearnerId id() const override { return LearnerId::kAlg4; }
  LossRange loss_range() const override { return LossRange::kSigned; }
  const std::vector<double>& cumulative_regret_estimates() const { return R_; }
  double beta() const { return beta_; }

 protected:
  void do_select(const std::vector<char>* active) override {
    if (active == nullptr || active->size() != k())
      throw ConfigError("the sleeping learner needs an active set of size K");
    rec_.active = *active;
    double active_mass = 0.0;
    std::vector<double> offsets(k());
    for (std::size_t i = 0; i < k(); ++i) offsets[i] = -R_[i];
    rec_.q = solve(offsets, {beta_}, PotentialKind::kTsallisLogBarrier);
    for (std::size_t i = 0; i < k(); ++i)
      if (rec_.active[i]) active_mass += rec_.q[i];
    if (!(active_mass > 0.0)) throw ConfigError("active set is empty");
    rec_.p.assign(k(), 0.0);
    for (std::size_t i = 0; i < k(); ++i)
      if (rec_.active[i]) rec_.p[i] = rec_.q[i] / active_mass;
    rec_.arm = sample_arm(rec_.p, rng_.uniform());
    rec_.beta = {beta_};
  }

  void check_outcome(int arm) const override {
    if (arm < 0 || arm >= cfg_.K || !rec_.active[static_cast<std::size_t>(arm)])
      throw InactiveArmChosen("arm " + std::to_string(arm) + " is asleep this round");
    Learner::check_outcome(arm);
  }

  void do_update(double loss) override {
    const auto arm = static_cast<std::size_t>(rec_.arm);
    rec_.lhat.resize(k());
    for (std::size_t i = 0; i < k(); ++i) {
      rec_.lhat[i] = rec_.active[i] ? estimate_loss_iw(loss, rec_.p[i], i == arm) : loss;
      R_[i] += loss - rec_.lhat[i];
    }
    const double z = spm_z_sleeping(rec_.p, rec_.active, beta_, cfg_);
    const double h = spm_h_tsallis(rec_.q, cfg_.alpha);
    beta_ = guarded_update(beta_, z, h);
    rec_.z = {z};
    rec_.h = {h};
    rec_.beta_next = {beta_};
  }

  void save_state(nlohmann::json& s) const override {
    s["R"] = R_;
    s["beta"] = beta_;
  }
  void load_state(const nlohmann::json& s) override {
    R_ = s.at("R").get<std::vector<double>>();
    beta_ = s.at("beta").get<double>();
  }

 private:
  std::vector<double> R_;
  double beta_;
};

// Exponential weights with uniform exploration, kept as a comparison point.
class Exp3Learner final : public Learner {
 public:
  Exp3Learner(const SpmConfig& cfg, std::uint64_t seed)
      : Learner(cfg, seed), L_(k(), 0.0) {
    const double K = cfg.K;
    const double T = static_cast<double>(cfg.T);
    explore_ = std::min(1.0, std::sqrt(K * std::log(K) / T));
    eta_ = std::sqrt(2.0 * std::log(K) / (T * K));
  }

  LearnerId id() const override { return LearnerId::kExp3; }
  LossRange loss_range() const override { return LossRange::kSigned; }

 protected:
  void do_select(const std::vector<char>*) override {
    const double lmin = *std::min_element(L_.begin(), L_.end());
    rec_.q.resize(k());
    double total = 0.0;
    for (std::size_t i = 0; i < k(); ++i) {
      rec_.q[i] = std::exp(-eta_ * (L_[i] - lmin));
      total += rec_.q[i];
    }
    for (auto& v : rec_.q) v /= total;
    rec_.p.resize(k());
    for (std::size_t i = 0; i < k(); ++i)
      rec_.p[i] = (1.0 - explore_) * rec_.q[i] + explore_ / static_cast<double>(k());
    rec_.arm = sample_arm(rec_.p, rng_.uniform());
  }

  void do_update(double loss) override {
    const auto arm = static_cast<std::size_t>(rec_.arm);
    rec_.lhat.assign(k(), 0.0);
    rec_.lhat[arm] = loss / rec_.p[arm];
    L_[arm] += rec_.lhat[arm];
  }

  void save_state(nlohmann::json& s) const override { s["L"] = L_; }
  void load_state(const nlohmann::json& s) override {
    L_ = s.at("L").get<std::vector<double>>();
  }

 private:
  std::vector<double> L_;
  double explore_ = 0.0;
  double eta_ = 0.0;
};

inline std::unique_ptr<Learner> make_learner(LearnerId id, const SpmConfig& cfg,
                                             std::uint64_t seed) {
  switch (id) {
    case LearnerId::kAlg1: return std::make_unique<Alg1Learner>(cfg, seed);
    case LearnerId::kAlg3: return std::make_unique<Alg3Learner>(cfg, seed);
    case LearnerId::kAlg4: return std::make_unique<Alg4Learner>(cfg, seed);
    case LearnerId::kAlg5: return std::make_unique<Alg5Learner>(cfg, seed);
    case LearnerId::kExp3: return std::make_unique<Exp3Learner>(cfg, seed);
  }
  throw ConfigError("unknown learner");
}

}  // namespace spm
