#include "czopt/sac.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace czopt {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kLog2 = 0.69314718055994530942;

double softplus(double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// log(1 - tanh(u)^2) = 2 (log 2 - u - softplus(-2u)); exact and stable
double log_one_minus_tanh_sq(double u) { return 2.0 * (kLog2 - u - softplus(-2.0 * u)); }

// d/du [-log(1 - tanh(u)^2)]
double squash_correction_du(double u) { return 2.0 - 4.0 * sigmoid(-2.0 * u); }

}  // namespace

void ReplayBuffer::push(Transition t) {
    if (store_.size() < capacity_) {
        store_.push_back(std::move(t));
    } else {
        store_[head_] = std::move(t);
        head_ = (head_ + 1) % capacity_;
    }
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t batch, Rng& rng) const {
    if (store_.empty()) throw PreconditionError("ReplayBuffer: cannot sample from empty buffer");
    std::vector<std::size_t> idx(batch);
    for (std::size_t i = 0; i < batch; ++i) idx[i] = rng.below(store_.size());
    return idx;
}

void SacConfig::validate() const {
    // gamma = 0 kept legal: the entropy-off / myopic limits are exercised in tests
    if (gamma < 0.0 || gamma >= 1.0) throw PreconditionError("SacConfig: gamma must lie in [0,1)");
    if (alpha < 0.0) throw PreconditionError("SacConfig: alpha must be non-negative");
    if (polyak <= 0.0 || polyak > 1.0) throw PreconditionError("SacConfig: polyak must lie in (0,1]");
    if (actor_lr <= 0.0 || critic_lr <= 0.0) throw PreconditionError("SacConfig: learning rates must be positive");
    if (batch_size < 1 || episodes < 1 || eval_interval < 1)
        throw PreconditionError("SacConfig: counts must be positive");
    if (warmup_steps < 0 || updates_per_step < 0)
        throw PreconditionError("SacConfig: warmup and update counts must be non-negative");
    if (buffer_capacity < static_cast<std::size_t>(batch_size))
        throw PreconditionError("SacConfig: buffer capacity below batch size");
    if (hidden.empty()) throw PreconditionError("SacConfig: need at least one hidden layer");
}

SacAgent::SacAgent(int obs_dim, const SacConfig& cfg, std::uint64_t seed)
    : obs_dim_(obs_dim), cfg_(cfg), rng_(seed), buffer_(cfg.buffer_capacity) {
    cfg_.validate();
    std::vector<int> policy_sizes = {obs_dim};
    policy_sizes.insert(policy_sizes.end(), cfg_.hidden.begin(), cfg_.hidden.end());
    policy_sizes.push_back(2);  // mean, log_std
    policy_ = Mlp::make(policy_sizes, rng_, 0.01);

    std::vector<int> critic_sizes = {obs_dim + 1};
    critic_sizes.insert(critic_sizes.end(), cfg_.hidden.begin(), cfg_.hidden.end());
    critic_sizes.push_back(1);
    q1_ = Mlp::make(critic_sizes, rng_);
    q2_ = Mlp::make(critic_sizes, rng_);
    q1t_ = q1_;
    q2t_ = q2_;

    policy_opt_ = Adam(policy_.param_count(), cfg_.actor_lr);
    q1_opt_ = Adam(q1_.param_count(), cfg_.critic_lr);
    q2_opt_ = Adam(q2_.param_count(), cfg_.critic_lr);
}

SacAgent::PolicyDraw SacAgent::draw_policy(const RealMatrix& obs) {
    PolicyDraw d;
    const std::size_t batch = obs.rows;
    const RealMatrix head = policy_.forward(obs, d.cache);
    d.actions = RealMatrix(batch, 1);
    d.logp.resize(batch);
    d.xi.resize(batch);
    d.mu.resize(batch);
    d.log_std.resize(batch);
    d.std_clamp_mask.resize(batch);
    for (std::size_t i = 0; i < batch; ++i) {
        const double mu = head(i, 0);
        const double raw = head(i, 1);
        const double ls = std::clamp(raw, kLogStdMin, kLogStdMax);
        d.mu[i] = mu;
        d.log_std[i] = ls;
        d.std_clamp_mask[i] = (raw > kLogStdMin && raw < kLogStdMax) ? 1.0 : 0.0;
        const double xi = rng_.normal();
        d.xi[i] = xi;
        const double u = mu + std::exp(ls) * xi;
        d.actions(i, 0) = std::tanh(u);
        d.logp[i] = -0.5 * xi * xi - ls - 0.5 * kLog2Pi - log_one_minus_tanh_sq(u);
    }
    return d;
}

ActionSample SacAgent::policy_sample(const Observation& s, bool deterministic) {
    RealMatrix x(1, obs_dim_);
    std::copy(s.begin(), s.end(), x.a.begin());
    const RealMatrix head = policy_.forward(x);
    const double mu = head(0, 0);
    if (deterministic) return {std::tanh(mu), std::nullopt};
    const double ls = std::clamp(head(0, 1), kLogStdMin, kLogStdMax);
    const double xi = rng_.normal();
    const double u = mu + std::exp(ls) * xi;
    const double logp = -0.5 * xi * xi - ls - 0.5 * kLog2Pi - log_one_minus_tanh_sq(u);
    return {std::tanh(u), logp};
}

std::pair<double, double> SacAgent::policy_params(const Observation& s) const {
    RealMatrix x(1, obs_dim_);
    std::copy(s.begin(), s.end(), x.a.begin());
    const RealMatrix head = policy_.forward(x);
    return {head(0, 0), std::clamp(head(0, 1), kLogStdMin, kLogStdMax)};
}

Batch SacAgent::make_batch(const std::vector<std::size_t>& indices) const {
    Batch b;
    const std::size_t n = indices.size();
    b.s = RealMatrix(n, obs_dim_);
    b.a = RealMatrix(n, 1);
    b.s2 = RealMatrix(n, obs_dim_);
    b.r.resize(n);
    b.done.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Transition& t = buffer_.at(indices[i]);
        std::copy(t.s.begin(), t.s.end(), b.s.row(i));
        std::copy(t.s2.begin(), t.s2.end(), b.s2.row(i));
        b.a(i, 0) = t.a;
        b.r[i] = t.r;
        b.done[i] = t.done ? 1 : 0;
    }
    return b;
}

std::vector<double> SacAgent::critic_target(const Batch& batch) {
    const std::size_t n = batch.size();
    PolicyDraw next = draw_policy(batch.s2);

    RealMatrix x(n, obs_dim_ + 1);
    for (std::size_t i = 0; i < n; ++i) {
        std::copy(batch.s2.row(i), batch.s2.row(i) + obs_dim_, x.row(i));
        x(i, obs_dim_) = next.actions(i, 0);
    }
    const RealMatrix qt1 = q1t_.forward(x);
    const RealMatrix qt2 = q2t_.forward(x);

    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double qmin = std::min(qt1(i, 0), qt2(i, 0));
        const double bootstrap = batch.done[i] ? 0.0 : cfg_.gamma * (qmin - cfg_.alpha * next.logp[i]);
        y[i] = batch.r[i] + bootstrap;
    }
    return y;
}

SacAgent::CriticEval SacAgent::critic_loss_grad(const Batch& batch) {
    if (batch.size() == 0) throw PreconditionError("critic_update: empty batch");
    const std::vector<double> y = critic_target(batch);
    const std::size_t n = batch.size();

    RealMatrix x(n, obs_dim_ + 1);
    for (std::size_t i = 0; i < n; ++i) {
        std::copy(batch.s.row(i), batch.s.row(i) + obs_dim_, x.row(i));
        x(i, obs_dim_) = batch.a(i, 0);
    }

    CriticEval out;
    out.g1 = q1_.zero_grads();
    out.g2 = q2_.zero_grads();
    Mlp* critics[2] = {&q1_, &q2_};
    Mlp::Grads* grads[2] = {&out.g1, &out.g2};
    double* losses[2] = {&out.loss1, &out.loss2};
    for (int c = 0; c < 2; ++c) {
        Mlp::Forward cache;
        const RealMatrix q = critics[c]->forward(x, cache);
        double loss = 0.0;
        RealMatrix dq(n, 1);
        for (std::size_t i = 0; i < n; ++i) {
            const double diff = q(i, 0) - y[i];
            loss += diff * diff;
            dq(i, 0) = 2.0 * diff / static_cast<double>(n);
        }
        loss /= static_cast<double>(n);
        if (!std::isfinite(loss)) throw TrainingAbort("critic_update: non-finite loss", updates_);
        critics[c]->backward(cache, dq, *grads[c]);
        *losses[c] = loss;
    }
    return out;
}

std::pair<double, double> SacAgent::critic_update(const Batch& batch) {
    CriticEval ev = critic_loss_grad(batch);
    q1_opt_.step(q1_, ev.g1);
    q2_opt_.step(q2_, ev.g2);
    return {ev.loss1, ev.loss2};
}

SacAgent::PolicyEval SacAgent::policy_loss_grad(const Batch& batch) {
    const std::size_t n = batch.size();
    PolicyDraw draw = draw_policy(batch.s);

    RealMatrix x(n, obs_dim_ + 1);
    for (std::size_t i = 0; i < n; ++i) {
        std::copy(batch.s.row(i), batch.s.row(i) + obs_dim_, x.row(i));
        x(i, obs_dim_) = draw.actions(i, 0);
    }
    Mlp::Forward c1, c2;
    const RealMatrix v1 = q1_.forward(x, c1);
    const RealMatrix v2 = q2_.forward(x, c2);

    double loss = 0.0;
    RealMatrix sel1(n, 1), sel2(n, 1);  // dloss/dq for each critic (critics stay frozen)
    for (std::size_t i = 0; i < n; ++i) {
        const double qmin = std::min(v1(i, 0), v2(i, 0));
        loss += cfg_.alpha * draw.logp[i] - qmin;
        const double d = -1.0 / static_cast<double>(n);
        if (v1(i, 0) <= v2(i, 0))
            sel1(i, 0) = d;
        else
            sel2(i, 0) = d;
    }
    loss /= static_cast<double>(n);
    if (!std::isfinite(loss)) throw TrainingAbort("policy_update: non-finite loss", updates_);

    Mlp::Grads discard1 = q1_.zero_grads();
    Mlp::Grads discard2 = q2_.zero_grads();
    const RealMatrix dx1 = q1_.backward(c1, sel1, discard1);
    const RealMatrix dx2 = q2_.backward(c2, sel2, discard2);

    RealMatrix dhead(n, 2);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double a = draw.actions(i, 0);
        const double u = draw.mu[i] + std::exp(draw.log_std[i]) * draw.xi[i];
        const double dl_da = dx1(i, obs_dim_) + dx2(i, obs_dim_);
        const double dl_du = cfg_.alpha * inv_n * squash_correction_du(u) + dl_da * (1.0 - a * a);
        const double sigma_xi = std::exp(draw.log_std[i]) * draw.xi[i];
        dhead(i, 0) = dl_du;
        dhead(i, 1) = (cfg_.alpha * inv_n * (-1.0) + dl_du * sigma_xi) * draw.std_clamp_mask[i];
    }
    PolicyEval out;
    out.loss = loss;
    out.grads = policy_.zero_grads();
    policy_.backward(draw.cache, dhead, out.grads);
    return out;
}

double SacAgent::policy_update(const Batch& batch) {
    PolicyEval ev = policy_loss_grad(batch);
    policy_opt_.step(policy_, ev.grads);
    return ev.loss;
}

void SacAgent::polyak_update() {
    const double rho = cfg_.polyak;
    Mlp* critics[2] = {&q1_, &q2_};
    Mlp* targets[2] = {&q1t_, &q2t_};
    for (int c = 0; c < 2; ++c) {
        auto& src = critics[c]->layers();
        auto& dst = targets[c]->layers();
        for (std::size_t l = 0; l < src.size(); ++l) {
            for (std::size_t i = 0; i < src[l].w.a.size(); ++i)
                dst[l].w.a[i] = (1.0 - rho) * dst[l].w.a[i] + rho * src[l].w.a[i];
            for (std::size_t i = 0; i < src[l].b.size(); ++i)
                dst[l].b[i] = (1.0 - rho) * dst[l].b[i] + rho * src[l].b[i];
        }
    }
}

void SacAgent::update() {
    const auto idx = buffer_.sample_indices(cfg_.batch_size, rng_);
    const Batch batch = make_batch(idx);
    critic_update(batch);
    policy_update(batch);
    polyak_update();
    ++updates_;
}

GateEnv::GateEnv(const CircuitParams& p, const PulseSchedule& shape)
    : shape_(shape),
      tracked_(default_tracked_labels()),
      prop_(p, shape.step_ns),
      n_steps_(shape.shape_steps()) {}

Observation GateEnv::observation() const {
    Observation obs = prop_.populations(tracked_);
    obs.push_back(static_cast<double>(prop_.steps_taken()) / static_cast<double>(n_steps_));
    return obs;
}

Observation GateEnv::reset() {
    prop_.reset();
    values_.clear();
    episode_open_ = true;
    return observation();
}

double GateEnv::wc_from_action(double a) const {
    const double wc = shape_.lo_ghz + 0.5 * (a + 1.0) * (shape_.hi_ghz - shape_.lo_ghz);
    return std::clamp(wc, shape_.lo_ghz, shape_.hi_ghz);
}

Env::StepResult GateEnv::step(double a) {
    if (!episode_open_) throw std::logic_error("GateEnv::step called after the episode finished");
    prop_.apply(wc_from_action(a));
    values_.push_back(wc_from_action(a));
    StepResult res;
    res.done = (prop_.steps_taken() == n_steps_);
    if (res.done) {
        const PhaseFit fit = cz_fidelity(prop_.comp_block());
        last_fidelity_ = fit.fidelity;
        res.reward = reward(fit.fidelity);
        episode_open_ = false;
    }
    res.obs = observation();
    return res;
}

PulseSchedule GateEnv::to_schedule(const std::vector<double>& actions) const {
    PulseSchedule s = shape_;
    s.values_ghz.clear();
    for (double a : actions) s.values_ghz.push_back(wc_from_action(a));
    s.validate();
    return s;
}

Observation PointTargetEnv::reset() {
    x_ = start_;
    t_ = 0;
    episode_open_ = true;
    return {x_, 0.0};
}

Env::StepResult PointTargetEnv::step(double a) {
    if (!episode_open_) throw std::logic_error("PointTargetEnv::step called after the episode finished");
    x_ += std::clamp(a, -1.0, 1.0) * move_;
    ++t_;
    StepResult res;
    res.done = (t_ == steps_);
    if (res.done) {
        res.reward = -std::abs(x_ - target_);
        episode_open_ = false;
    }
    res.obs = {x_, static_cast<double>(t_) / steps_};
    return res;
}

SacTrainResult sac_train(Env& env, SacAgent& agent, const std::function<double()>& eval_metric) {
    const SacConfig& cfg = agent.config();
    SacTrainResult out;
    out.best_return = -std::numeric_limits<double>::infinity();

    long global_step = 0;
    for (int ep = 1; ep <= cfg.episodes; ++ep) {
        Observation s = env.reset();
        std::vector<double> actions;
        actions.reserve(env.episode_steps());
        double ret = 0.0;
        bool done = false;
        while (!done) {
            double a;
            if (global_step < cfg.warmup_steps)
                a = agent.rng().uniform(-1.0, 1.0);
            else
                a = agent.policy_sample(s, false).a;
            Env::StepResult sr = env.step(a);
            agent.observe({std::move(s), a, sr.reward, sr.obs, sr.done});
            s = std::move(sr.obs);
            ret += sr.reward;
            actions.push_back(a);
            done = sr.done;
            ++global_step;
            if (global_step > cfg.warmup_steps &&
                agent.buffer().size() >= static_cast<std::size_t>(cfg.batch_size))
                for (int u = 0; u < cfg.updates_per_step; ++u) agent.update();
        }
        if (ret > out.best_return) {
            out.best_return = ret;
            out.best_actions = actions;
        }

        CurvePoint pt;
        pt.episode = ep;
        pt.episode_return = ret;
        if (ep % cfg.eval_interval == 0) {
            Observation es = env.reset();
            std::vector<double> eacts;
            eacts.reserve(env.episode_steps());
            double eret = 0.0;
            bool edone = false;
            while (!edone) {
                const double ea = agent.policy_sample(es, true).a;
                Env::StepResult sr = env.step(ea);
                es = std::move(sr.obs);
                eret += sr.reward;
                eacts.push_back(ea);
                edone = sr.done;
            }
            pt.has_eval = true;
            pt.eval_return = eret;
            pt.eval_metric = eval_metric ? eval_metric() : eret;
            if (eret > out.best_return) {
                out.best_return = eret;
                out.best_actions = eacts;
            }
        }
        out.curve.push_back(pt);
    }
    return out;
}

TrainResult train(const CircuitParams& p, const SacConfig& cfg, const PulseSchedule& shape,
                  std::uint64_t seed) {
    GateEnv env(p, shape);
    SacAgent agent(env.obs_dim(), cfg, seed);
    SacTrainResult r = sac_train(env, agent, [&]() { return env.last_fidelity(); });

    TrainResult out;
    out.best_schedule = env.to_schedule(r.best_actions);
    out.best_fidelity = propagate(p, out.best_schedule).fidelity;
    out.curve = std::move(r.curve);
    return out;
}

}  // namespace czopt
