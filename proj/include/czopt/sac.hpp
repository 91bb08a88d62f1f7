#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "czopt/circuit.hpp"
#include "czopt/control.hpp"
#include "czopt/mlp.hpp"
#include "czopt/rng.hpp"

namespace czopt {

using Observation = std::vector<double>;

struct Transition {
    Observation s;
    double a = 0.0;  // normalized action in [-1, 1]
    double r = 0.0;
    Observation s2;
    bool done = false;
};

// Bounded ring store with uniform sampling (with replacement). Once full,
// the oldest transitions are evicted first.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {}

    void push(Transition t);
    std::size_t size() const { return store_.size(); }
    std::size_t capacity() const { return capacity_; }
    const Transition& at(std::size_t i) const { return store_[i]; }

    std::vector<std::size_t> sample_indices(std::size_t batch, Rng& rng) const;

private:
    std::size_t capacity_;
    std::size_t head_ = 0;  // next slot to overwrite once full
    std::vector<Transition> store_;
};

struct SacConfig {
    double gamma = 0.99;
    double alpha = 0.1;  // fixed entropy weight
    double polyak = 0.005;
    double actor_lr = 3e-4;
    double critic_lr = 3e-4;
    int batch_size = 256;
    std::size_t buffer_capacity = 1000000;
    int warmup_steps = 1000;
    int updates_per_step = 1;
    int episodes = 2000;
    int eval_interval = 50;
    std::vector<int> hidden = {256, 256};
    void validate() const;
};

struct Batch {
    RealMatrix s, a, s2;
    std::vector<double> r;
    std::vector<char> done;
    std::size_t size() const { return r.size(); }
};

struct ActionSample {
    double a = 0.0;
    std::optional<double> log_prob;  // absent in deterministic mode
};

struct TrainingAbort : std::runtime_error {
    TrainingAbort(const std::string& what, long step) : std::runtime_error(what), step(step) {}
    long step = 0;
};

// Squashed-Gaussian policy with twin critics and Polyak-averaged targets.
// All networks are plain Mlps updated by hand-rolled backprop.
class SacAgent {
public:
    SacAgent(int obs_dim, const SacConfig& cfg, std::uint64_t seed);

    ActionSample policy_sample(const Observation& s, bool deterministic);
    // (mu, clamped log_std) of the policy head; used by density tests
    std::pair<double, double> policy_params(const Observation& s) const;

    Batch make_batch(const std::vector<std::size_t>& indices) const;
    std::vector<double> critic_target(const Batch& batch);

    struct CriticEval {
        double loss1 = 0.0, loss2 = 0.0;
        Mlp::Grads g1, g2;
    };
    // losses and parameter gradients with the Bellman targets held constant
    CriticEval critic_loss_grad(const Batch& batch);
    std::pair<double, double> critic_update(const Batch& batch);

    struct PolicyEval {
        double loss = 0.0;
        Mlp::Grads grads;
    };
    // entropy-regularized policy loss and its gradient; critics stay frozen
    PolicyEval policy_loss_grad(const Batch& batch);
    double policy_update(const Batch& batch);

    void polyak_update();

    void observe(Transition t) { buffer_.push(std::move(t)); }
    // one full SAC update (critic, policy, targets) on a fresh uniform batch
    void update();

    ReplayBuffer& buffer() { return buffer_; }
    const ReplayBuffer& buffer() const { return buffer_; }
    const SacConfig& config() const { return cfg_; }
    Rng& rng() { return rng_; }
    int obs_dim() const { return obs_dim_; }
    long updates_done() const { return updates_; }

    Mlp& policy() { return policy_; }
    Mlp& q1() { return q1_; }
    Mlp& q2() { return q2_; }
    Mlp& q1_target() { return q1t_; }
    Mlp& q2_target() { return q2t_; }
    const Mlp& policy_const() const { return policy_; }
    const Mlp& q1_const() const { return q1_; }
    const Mlp& q2_const() const { return q2_; }
    const Mlp& q1_target_const() const { return q1t_; }
    const Mlp& q2_target_const() const { return q2t_; }
    Rng::State rng_state() const { return rng_.state(); }

    static constexpr double kLogStdMin = -20.0;
    static constexpr double kLogStdMax = 2.0;

private:
    // batched reparameterized sampling; fills per-sample slots
    struct PolicyDraw {
        RealMatrix actions;        // B x 1, tanh-squashed
        std::vector<double> logp;  // B
        std::vector<double> xi;    // standard normal draws
        std::vector<double> mu, log_std, std_clamp_mask;
        Mlp::Forward cache;
    };
    PolicyDraw draw_policy(const RealMatrix& obs);

    int obs_dim_;
    SacConfig cfg_;
    Rng rng_;
    Mlp policy_, q1_, q2_, q1t_, q2t_;
    Adam policy_opt_, q1_opt_, q2_opt_;
    ReplayBuffer buffer_;
    long updates_ = 0;
};

// Episodic environment with a 1-D action in [-1, 1].
class Env {
public:
    virtual ~Env() = default;
    virtual int obs_dim() const = 0;
    virtual std::size_t episode_steps() const = 0;
    virtual Observation reset() = 0;
    struct StepResult {
        Observation obs;
        double reward = 0.0;
        bool done = false;
    };
    virtual StepResult step(double a) = 0;
};

// The gate environment: actions pick the coupler frequency per step; the
// sparse reward -log10(1 - F) arrives at the terminal step.
class GateEnv : public Env {
public:
    GateEnv(const CircuitParams& p, const PulseSchedule& shape);

    int obs_dim() const override { return static_cast<int>(4 * tracked_.size() + 1); }
    std::size_t episode_steps() const override { return n_steps_; }
    Observation reset() override;
    StepResult step(double a) override;

    double wc_from_action(double a) const;
    PulseSchedule to_schedule(const std::vector<double>& actions) const;
    const std::vector<double>& current_values() const { return values_; }
    double last_fidelity() const { return last_fidelity_; }

private:
    Observation observation() const;
    PulseSchedule shape_;
    std::vector<LevelLabel> tracked_;
    StepPropagator prop_;
    std::size_t n_steps_;
    std::vector<double> values_;
    bool episode_open_ = false;
    double last_fidelity_ = 0.0;
};

// Deterministic 1-D toy task: move a point toward a target; terminal reward
// -|x - target|. Used to sanity-check the learner against a known optimum.
class PointTargetEnv : public Env {
public:
    PointTargetEnv(int steps = 5, double move = 0.25, double start = 0.0, double target = 0.5)
        : steps_(steps), move_(move), start_(start), target_(target) {}

    int obs_dim() const override { return 2; }
    std::size_t episode_steps() const override { return steps_; }
    Observation reset() override;
    StepResult step(double a) override;

    double optimal_return() const { return 0.0; }
    double baseline_return() const { return -std::abs(start_ - target_); }

private:
    int steps_;
    double move_, start_, target_;
    double x_ = 0.0;
    int t_ = 0;
    bool episode_open_ = false;
};

struct CurvePoint {
    int episode = 0;
    double episode_return = 0.0;
    bool has_eval = false;
    double eval_return = 0.0;
    double eval_metric = 0.0;  // environment-specific score (gate fidelity)
};

struct SacTrainResult {
    std::vector<double> best_actions;
    double best_return = 0.0;
    std::vector<CurvePoint> curve;
};

// Generic training loop: uniform random warmup, per-step updates, periodic
// deterministic evaluation, best-ever episode retained by terminal return.
SacTrainResult sac_train(Env& env, SacAgent& agent,
                         const std::function<double()>& eval_metric = {});

struct TrainResult {
    PulseSchedule best_schedule;
    double best_fidelity = 0.0;  // scored through propagate()
    std::vector<CurvePoint> curve;
};

TrainResult train(const CircuitParams& p, const SacConfig& cfg, const PulseSchedule& shape,
                  std::uint64_t seed);

}  // namespace czopt
