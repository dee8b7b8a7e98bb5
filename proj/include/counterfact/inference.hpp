#ifndef COUNTERFACT_INFERENCE_HPP
#define COUNTERFACT_INFERENCE_HPP

#include "counterfact/common.hpp"
#include "counterfact/data.hpp"
#include "counterfact/dynamics.hpp"
#include "counterfact/parallel.hpp"
#include "counterfact/waning.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace counterfact
{

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Log densities

namespace logpdf
{
inline double normal(double x, double mu, double sigma)
{
    const double z = (x - mu) / sigma;
    return -0.5 * z * z - std::log(sigma) - 0.5 * std::log(2.0 * std::numbers::pi);
}

inline double half_cauchy(double x, double scale)
{
    if (x < 0.0) {
        return kNegInf;
    }
    return std::log(2.0 / (std::numbers::pi * scale)) - std::log1p((x / scale) * (x / scale));
}

/// Density of z = log X for X ~ Weibull(lambda, k).
inline double log_weibull(double z, double lambda, double k)
{
    const double u = k * (z - std::log(lambda));
    return std::log(k) + u - std::exp(u);
}

inline double student_t(double x, double nu, double mu, double sigma)
{
    const double z = (x - mu) / sigma;
    return std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) - 0.5 * std::log(nu * std::numbers::pi) -
           std::log(sigma) - 0.5 * (nu + 1.0) * std::log1p(z * z / nu);
}
} // namespace logpdf

// ---------------------------------------------------------------------------
// Model specification

struct PriorSpec {
    double r0_mu = 1.0;
    double r0_sigma = 1.0;
    double effect_scale = 0.5; // HalfCauchy scale of the change-point step size
    double length_mu = 4.0;
    double length_sigma = 1.0;
    double date_sigma = 3.5;
    double influx_per_million = 0.1; // Weibull scale per million inhabitants
    double influx_shape = 0.3;
    double kappa_scale = 30.0;
    double nu = 4.0;
    int change_points = 10;
    double spacing_days = 21.0;
    /// First change point, in days after the window start.
    double first_change_day = 21.0;
    /// Tempering of the likelihood; 0 samples the prior.
    double likelihood_scale = 1.0;

    double influx_lambda(double population) const { return influx_per_million * population / 1e6; }

    /// First change point on 10 January 2021, expressed relative to the window start.
    static double anchored_first_day(Date window_start)
    {
        return double(days_between(window_start, parse_date("2021-01-10")));
    }
};

/// Unconstrained coordinates per age group:
/// log R0, log sigma, effects[n], length_raw[n], date_offset[n], log influx[t]; then log kappa.
struct ParameterLayout {
    std::size_t groups = 0;
    std::size_t cps = 0;
    std::size_t weeks = 0;

    std::size_t per_age() const { return 2 + 3 * cps + weeks; }
    std::size_t size() const { return groups * per_age() + 1; }
    std::size_t log_r0(std::size_t a) const { return a * per_age(); }
    std::size_t log_sigma(std::size_t a) const { return a * per_age() + 1; }
    std::size_t effect(std::size_t a, std::size_t n) const { return a * per_age() + 2 + n; }
    std::size_t length(std::size_t a, std::size_t n) const { return a * per_age() + 2 + cps + n; }
    std::size_t date(std::size_t a, std::size_t n) const { return a * per_age() + 2 + 2 * cps + n; }
    std::size_t influx(std::size_t a, std::size_t t) const { return a * per_age() + 2 + 3 * cps + t; }
    std::size_t log_kappa() const { return groups * per_age(); }

    enum class Kind { BaseReproduction, Scale, Influx, Noise };

    std::size_t age_of(std::size_t i) const { return i / per_age(); }

    Kind kind(std::size_t i) const
    {
        if (i == log_kappa()) {
            return Kind::Noise;
        }
        const std::size_t k = i % per_age();
        if (k == 1) {
            return Kind::Scale;
        }
        if (k >= 2 + 3 * cps) {
            return Kind::Influx;
        }
        return Kind::BaseReproduction;
    }

    std::string name(std::size_t i) const
    {
        if (i == log_kappa()) {
            return "log_kappa";
        }
        const auto a = std::to_string(age_of(i));
        const std::size_t k = i % per_age();
        if (k == 0) {
            return "log_R0[" + a + "]";
        }
        if (k == 1) {
            return "log_sigma[" + a + "]";
        }
        if (k < 2 + cps) {
            return "effect[" + a + "][" + std::to_string(k - 2) + "]";
        }
        if (k < 2 + 2 * cps) {
            return "length_raw[" + a + "][" + std::to_string(k - 2 - cps) + "]";
        }
        if (k < 2 + 3 * cps) {
            return "date_offset[" + a + "][" + std::to_string(k - 2 - 2 * cps) + "]";
        }
        return "log_influx[" + a + "][" + std::to_string(k - 2 - 3 * cps) + "]";
    }
};

/// One posterior draw.
struct PosteriorSample {
    DynamicsParams params;
    std::vector<double> sigma; // change-point step size per age
    double kappa = 0.0;
    double log_posterior = 0.0;
    int chain = 0;
    int draw = 0;
    std::vector<double> theta; // unconstrained coordinates
};

struct SamplerConfig {
    int chains = 8;
    int init_steps = 150;
    int keep_chains = 2;
    int tune = 500;
    int draws = 500;
    /// Componentwise sweeps per recorded step.
    int sweeps_per_step = 10;
    double target_acceptance = 0.44;
    int adapt_batch = 25;
    std::uint64_t seed = 1;
    unsigned threads = 0;
};

struct InferenceConfig {
    PriorSpec prior;
    DynamicsConfig dynamics;
    SamplerConfig sampler;
};

inline InferenceConfig default_inference_config(const ObservedDataset& d)
{
    InferenceConfig c;
    c.prior.first_change_day = PriorSpec::anchored_first_day(d.start);
    return c;
}

/// Posterior of the renewal model given observed weekly cases under the factual strategy.
class DynamicsModel
{
public:
    DynamicsModel(const ObservedDataset& data, const WaningCurve& waning, InferenceConfig cfg)
        : cfg_(std::move(cfg))
        , population_(data.populations())
        , contacts_(cfg_.dynamics.mixing, population_)
        , infect_(infectability_table(data.factual, waning))
        , cases_(data.cases)
        , weeks_(data.weeks)
    {
        if (cfg_.prior.change_points < 0) {
            throw ConfigError("change-point count must be non-negative");
        }
        layout_ = {population_.size(), static_cast<std::size_t>(cfg_.prior.change_points),
                   static_cast<std::size_t>(weeks_)};
        std::vector<double> first;
        for (const auto& c : cases_) {
            first.push_back(c.at(0));
        }
        seeding_ = Seeding::from_first_week(first, cfg_.dynamics.kernel.size());
    }

    const ParameterLayout& layout() const { return layout_; }
    const InferenceConfig& config() const { return cfg_; }
    const std::vector<double>& population() const { return population_; }
    const ContactMatrix& contacts() const { return contacts_; }
    const std::vector<std::vector<double>>& infectability() const { return infect_; }
    const Seeding& seeding() const { return seeding_; }
    int weeks() const { return weeks_; }

    DynamicsParams to_params(std::span<const double> th) const
    {
        DynamicsParams p;
        const auto& L = layout_;
        for (std::size_t a = 0; a < L.groups; ++a) {
            p.r0.push_back(std::exp(th[L.log_r0(a)]));
            std::vector<ChangePoint> cps;
            for (std::size_t n = 0; n < L.cps; ++n) {
                cps.push_back({th[L.effect(a, n)], softplus(th[L.length(a, n)]),
                               cfg_.prior.first_change_day + cfg_.prior.spacing_days * double(n) + th[L.date(a, n)]});
            }
            p.change_points.push_back(std::move(cps));
            std::vector<double> h;
            for (std::size_t t = 0; t < L.weeks; ++t) {
                h.push_back(std::exp(th[L.influx(a, t)]));
            }
            p.influx.push_back(std::move(h));
        }
        return p;
    }

    double log_prior(std::span<const double> th) const
    {
        const auto& P = cfg_.prior;
        const auto& L = layout_;
        double lp = 0.0;
        for (std::size_t a = 0; a < L.groups; ++a) {
            lp += logpdf::normal(th[L.log_r0(a)], P.r0_mu, P.r0_sigma);
            const double ls = th[L.log_sigma(a)];
            const double sigma = std::exp(ls);
            lp += logpdf::half_cauchy(sigma, P.effect_scale) + ls;
            for (std::size_t n = 0; n < L.cps; ++n) {
                lp += logpdf::normal(th[L.effect(a, n)], 0.0, sigma);
                lp += logpdf::normal(th[L.length(a, n)], P.length_mu, P.length_sigma);
                lp += logpdf::normal(th[L.date(a, n)], 0.0, P.date_sigma);
            }
            const double lambda = P.influx_lambda(population_[a]);
            for (std::size_t t = 0; t < L.weeks; ++t) {
                lp += logpdf::log_weibull(th[L.influx(a, t)], lambda, P.influx_shape);
            }
        }
        const double lk = th[L.log_kappa()];
        lp += logpdf::half_cauchy(std::exp(lk), P.kappa_scale) + lk;
        return std::isfinite(lp) ? lp : kNegInf;
    }

    /// Student-t log likelihood of the observed cases given modelled cases and kappa.
    double log_likelihood(const std::vector<std::vector<double>>& modelled, double kappa) const
    {
        if (!(kappa > 0.0)) {
            return kNegInf;
        }
        double ll = 0.0;
        for (std::size_t a = 0; a < cases_.size(); ++a) {
            for (std::size_t t = 0; t < cases_[a].size(); ++t) {
                const double c_hat = modelled[a][t];
                ll += logpdf::student_t(cases_[a][t], cfg_.prior.nu, c_hat, kappa * std::sqrt(c_hat + 1.0));
            }
        }
        return std::isfinite(ll) ? ll : kNegInf;
    }

    /// Modelled weekly cases; empty when the parameters drive the state negative.
    std::vector<std::vector<double>> modelled_cases(const std::vector<std::vector<double>>& r_base,
                                                    const DynamicsParams& p) const
    {
        try {
            return simulate_with_base(r_base, p, cfg_.dynamics, contacts_, infect_, seeding_, population_, weeks_)
                .weekly_cases;
        }
        catch (const NumericalError&) {
            return {};
        }
    }

    EpidemicState simulate(const DynamicsParams& p) const
    {
        return counterfact::simulate(p, cfg_.dynamics, contacts_, infect_, seeding_, population_, weeks_);
    }

    double log_posterior(std::span<const double> th) const
    {
        const double lp = log_prior(th);
        if (!std::isfinite(lp)) {
            return kNegInf;
        }
        if (cfg_.prior.likelihood_scale == 0.0) {
            return lp;
        }
        const auto p = to_params(th);
        const auto c = modelled_cases(base_reproduction_table(p, cfg_.dynamics, weeks_), p);
        if (c.empty()) {
            return kNegInf;
        }
        return lp + cfg_.prior.likelihood_scale * log_likelihood(c, std::exp(th[layout_.log_kappa()]));
    }

    /// Prior median in unconstrained coordinates.
    std::vector<double> prior_median() const
    {
        const auto& P = cfg_.prior;
        const auto& L = layout_;
        std::vector<double> th(L.size(), 0.0);
        for (std::size_t a = 0; a < L.groups; ++a) {
            th[L.log_r0(a)] = P.r0_mu;
            th[L.log_sigma(a)] = std::log(P.effect_scale);
            for (std::size_t n = 0; n < L.cps; ++n) {
                th[L.length(a, n)] = P.length_mu;
            }
            const double median = P.influx_lambda(population_[a]) * std::pow(std::log(2.0), 1.0 / P.influx_shape);
            for (std::size_t t = 0; t < L.weeks; ++t) {
                th[L.influx(a, t)] = std::log(median);
            }
        }
        th[L.log_kappa()] = std::log(P.kappa_scale);
        return th;
    }

    PosteriorSample make_sample(std::span<const double> th, double lp, int chain, int draw) const
    {
        PosteriorSample s;
        s.params = to_params(th);
        for (std::size_t a = 0; a < layout_.groups; ++a) {
            s.sigma.push_back(std::exp(th[layout_.log_sigma(a)]));
        }
        s.kappa = std::exp(th[layout_.log_kappa()]);
        s.log_posterior = lp;
        s.chain = chain;
        s.draw = draw;
        s.theta.assign(th.begin(), th.end());
        return s;
    }

private:
    InferenceConfig cfg_;
    std::vector<double> population_;
    ContactMatrix contacts_;
    std::vector<std::vector<double>> infect_;
    std::vector<std::vector<double>> cases_;
    int weeks_;
    ParameterLayout layout_;
    Seeding seeding_;
};

// ---------------------------------------------------------------------------
// Sampler

/// State of one Metropolis-within-Gibbs chain with cached simulation pieces.
class ChainState
{
public:
    ChainState(const DynamicsModel& model, std::vector<double> theta, std::uint64_t seed)
        : model_(model)
        , theta_(std::move(theta))
        , log_step_(theta_.size(), std::log(0.5))
        , accepted_(theta_.size(), 0)
        , proposed_(theta_.size(), 0)
        , total_accepted_(0)
        , total_proposed_(0)
        , rng_(seed)
    {
        refresh();
    }

    double log_posterior() const { return lp_; }
    const std::vector<double>& theta() const { return theta_; }
    double acceptance_rate() const
    {
        return total_proposed_ ? double(total_accepted_) / double(total_proposed_) : 0.0;
    }

    /// One pass over every coordinate in random order.
    void sweep(bool adapt)
    {
        const auto& L = model_.layout();
        order_.resize(theta_.size());
        std::iota(order_.begin(), order_.end(), 0);
        std::shuffle(order_.begin(), order_.end(), rng_);
        std::normal_distribution<double> normal(0.0, 1.0);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        const double scale = model_.config().prior.likelihood_scale;
        for (std::size_t i : order_) {
            const double old = theta_[i];
            theta_[i] = old + std::exp(log_step_[i]) * normal(rng_);
            const double prior = model_.log_prior(theta_);
            double ll = ll_;
            std::vector<double> r_row;
            std::vector<std::vector<double>> cases;
            const auto kind = L.kind(i);
            bool ok = std::isfinite(prior);
            if (ok && scale != 0.0) {
                if (kind == ParameterLayout::Kind::BaseReproduction || kind == ParameterLayout::Kind::Influx) {
                    params_ = model_.to_params(theta_);
                    const std::size_t a = L.age_of(i);
                    if (kind == ParameterLayout::Kind::BaseReproduction) {
                        r_row = base_row(params_, a);
                        std::swap(r_base_[a], r_row);
                    }
                    cases = model_.modelled_cases(r_base_, params_);
                    if (kind == ParameterLayout::Kind::BaseReproduction) {
                        std::swap(r_base_[a], r_row);
                    }
                    ok = !cases.empty();
                    if (ok) {
                        ll = model_.log_likelihood(cases, std::exp(theta_[L.log_kappa()]));
                    }
                }
                else if (kind == ParameterLayout::Kind::Noise) {
                    ll = cases_.empty() ? kNegInf : model_.log_likelihood(cases_, std::exp(theta_[i]));
                }
                ok = ok && std::isfinite(ll);
            }
            const double lp_new = ok ? prior + scale * ll : kNegInf;
            ++proposed_[i];
            ++total_proposed_;
            const bool accept = ok && (std::isfinite(lp_) ? std::log(unif(rng_)) < lp_new - lp_ : std::isfinite(lp_new));
            if (accept) {
                lp_ = lp_new;
                ll_ = ll;
                if (!cases.empty()) {
                    cases_ = std::move(cases);
                }
                if (!r_row.empty()) {
                    r_base_[L.age_of(i)] = std::move(r_row);
                }
                ++accepted_[i];
                ++total_accepted_;
            }
            else {
                theta_[i] = old;
            }
        }
        if (adapt && ++sweeps_since_adapt_ >= model_.config().sampler.adapt_batch) {
            adapt_steps();
        }
    }

private:
    std::vector<double> base_row(const DynamicsParams& p, std::size_t a) const
    {
        const auto& cfg = model_.config().dynamics;
        const int first = cfg.first_day();
        const auto days = static_cast<std::size_t>(kDaysPerWeek * model_.weeks() - first);
        std::vector<double> row(days);
        for (std::size_t i = 0; i < days; ++i) {
            row[i] = base_reproduction(p, a, double(first) + double(i));
        }
        return row;
    }

    void refresh()
    {
        params_ = model_.to_params(theta_);
        r_base_ = base_reproduction_table(params_, model_.config().dynamics, model_.weeks());
        const double prior = model_.log_prior(theta_);
        cases_ = model_.modelled_cases(r_base_, params_);
        ll_ = cases_.empty() ? kNegInf : model_.log_likelihood(cases_, std::exp(theta_[model_.layout().log_kappa()]));
        const double scale = model_.config().prior.likelihood_scale;
        lp_ = scale == 0.0 ? prior : prior + scale * ll_;
        if (std::isnan(lp_)) {
            lp_ = kNegInf;
        }
    }

    void adapt_steps()
    {
        ++adapt_round_;
        const double delta = std::min(0.1, 1.0 / std::sqrt(double(adapt_round_)));
        const double target = model_.config().sampler.target_acceptance;
        for (std::size_t i = 0; i < theta_.size(); ++i) {
            if (proposed_[i] == 0) {
                continue;
            }
            const double rate = double(accepted_[i]) / double(proposed_[i]);
            log_step_[i] += rate > target ? delta : -delta;
            log_step_[i] = std::clamp(log_step_[i], std::log(1e-4), std::log(10.0));
            accepted_[i] = proposed_[i] = 0;
        }
        sweeps_since_adapt_ = 0;
    }

    const DynamicsModel& model_;
    std::vector<double> theta_;
    std::vector<double> log_step_;
    std::vector<long> accepted_, proposed_;
    long total_accepted_, total_proposed_;
    std::mt19937_64 rng_;
    std::vector<std::size_t> order_;
    DynamicsParams params_;
    std::vector<std::vector<double>> r_base_;
    std::vector<std::vector<double>> cases_;
    double ll_ = 0.0;
    double lp_ = 0.0;
    int sweeps_since_adapt_ = 0;
    int adapt_round_ = 0;
};

struct ChainDiagnostics {
    int chain = 0;
    bool kept = false;
    double init_log_posterior = 0.0;
    double final_log_posterior = 0.0;
    double acceptance = 0.0;
    /// Log posterior after every recorded step (initialisation, tuning and drawing).
    std::vector<double> trace;
};

struct PosteriorResult {
    std::vector<PosteriorSample> samples;
    std::vector<ChainDiagnostics> chains;
    ParameterLayout layout;
    InferenceConfig config;
    double seconds = 0.0;
};

/// Indices of the `keep` chains with the highest log posterior, ties to the lower index.
inline std::vector<std::size_t> select_chains(const std::vector<double>& log_posteriors, std::size_t keep)
{
    std::vector<std::size_t> idx(log_posteriors.size());
    std::iota(idx.begin(), idx.end(), 0);
    auto key = [&](std::size_t i) { return std::isnan(log_posteriors[i]) ? kNegInf : log_posteriors[i]; };
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return key(a) > key(b); });
    idx.resize(std::min(keep, idx.size()));
    std::sort(idx.begin(), idx.end());
    return idx;
}

/// Random initialisation, short warm-up of every chain, keep the best, then tune and draw.
inline PosteriorResult sample_posterior(const DynamicsModel& model)
{
    const auto t0 = std::chrono::steady_clock::now();
    const auto& sc = model.config().sampler;
    if (sc.chains < 1 || sc.keep_chains < 1 || sc.keep_chains > sc.chains || sc.init_steps < 0 || sc.tune < 0 ||
        sc.draws < 1 || sc.sweeps_per_step < 1) {
        throw ConfigError("invalid sampler budget");
    }
    const unsigned threads = resolve_threads(sc.threads);
    const auto median = model.prior_median();

    std::vector<std::unique_ptr<ChainState>> chains(static_cast<std::size_t>(sc.chains));
    PosteriorResult result;
    result.layout = model.layout();
    result.config = model.config();
    result.chains.resize(chains.size());

    parallel_for(chains.size(), threads, [&](std::size_t c) {
        std::seed_seq seq{sc.seed, std::uint64_t(c), std::uint64_t(0x5eed)};
        std::mt19937_64 init_rng(seq);
        std::uniform_real_distribution<double> jitter(-1.0, 1.0);
        std::vector<double> theta;
        for (int attempt = 0; attempt < 20; ++attempt) {
            theta = median;
            for (double& x : theta) {
                x += jitter(init_rng);
            }
            if (std::isfinite(model.log_posterior(theta))) {
                break;
            }
        }
        chains[c] = std::make_unique<ChainState>(model, theta, init_rng());
        auto& diag = result.chains[c];
        diag.chain = static_cast<int>(c);
        diag.init_log_posterior = chains[c]->log_posterior();
        for (int s = 0; s < sc.init_steps; ++s) {
            for (int k = 0; k < sc.sweeps_per_step; ++k) {
                chains[c]->sweep(true);
            }
            diag.trace.push_back(chains[c]->log_posterior());
        }
    });

    std::vector<double> scores;
    for (const auto& ch : chains) {
        scores.push_back(ch->log_posterior());
    }
    const auto kept = select_chains(scores, static_cast<std::size_t>(sc.keep_chains));
    bool any_finite = false;
    for (auto k : kept) {
        result.chains[k].kept = true;
        any_finite = any_finite || std::isfinite(scores[k]);
    }
    if (!any_finite) {
        std::string msg = "all chains diverged during initialisation:";
        for (std::size_t c = 0; c < scores.size(); ++c) {
            msg += " chain " + std::to_string(c) + " log posterior " + format_double(scores[c]) + ";";
        }
        throw NumericalError(msg);
    }

    std::vector<std::vector<PosteriorSample>> draws(kept.size());
    parallel_for(kept.size(), threads, [&](std::size_t j) {
        const std::size_t c = kept[j];
        auto& ch = *chains[c];
        auto& diag = result.chains[c];
        for (int s = 0; s < sc.tune; ++s) {
            for (int k = 0; k < sc.sweeps_per_step; ++k) {
                ch.sweep(true);
            }
            diag.trace.push_back(ch.log_posterior());
        }
        for (int s = 0; s < sc.draws; ++s) {
            for (int k = 0; k < sc.sweeps_per_step; ++k) {
                ch.sweep(false);
            }
            diag.trace.push_back(ch.log_posterior());
            draws[j].push_back(model.make_sample(ch.theta(), ch.log_posterior(), static_cast<int>(c), s));
        }
    });
    for (std::size_t c = 0; c < chains.size(); ++c) {
        result.chains[c].final_log_posterior = chains[c]->log_posterior();
        result.chains[c].acceptance = chains[c]->acceptance_rate();
    }
    for (auto& d : draws) {
        for (auto& s : d) {
            if (!std::isfinite(s.log_posterior)) {
                throw NumericalError("non-finite log posterior in chain " + std::to_string(s.chain));
            }
            result.samples.push_back(std::move(s));
        }
    }
    result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

// ---------------------------------------------------------------------------
// Posterior summaries

/// [age][week-1] weekly-mean base reproduction number per draw.
inline std::vector<std::vector<Interval>> base_reproduction_bands(const std::vector<PosteriorSample>& samples,
                                                                  int weeks)
{
    if (samples.empty()) {
        return {};
    }
    const std::size_t groups = samples.front().params.groups();
    std::vector<std::vector<std::vector<double>>> values(
        groups, std::vector<std::vector<double>>(static_cast<std::size_t>(weeks)));
    for (const auto& s : samples) {
        const auto r = weekly_base_reproduction(s.params, weeks);
        for (std::size_t a = 0; a < groups; ++a) {
            for (std::size_t t = 0; t < r[a].size(); ++t) {
                values[a][t].push_back(r[a][t]);
            }
        }
    }
    std::vector<std::vector<Interval>> out(groups);
    for (std::size_t a = 0; a < groups; ++a) {
        for (const auto& v : values[a]) {
            out[a].push_back(summarize(v));
        }
    }
    return out;
}

struct PredictiveBands {
    /// [age][week-1] modelled cases.
    std::vector<std::vector<Interval>> model;
    /// [age][week-1] modelled cases plus Student-t observation noise.
    std::vector<std::vector<Interval>> predictive;
};

inline PredictiveBands posterior_predictive(const DynamicsModel& model, const std::vector<PosteriorSample>& samples,
                                            std::uint64_t seed = 1)
{
    if (samples.empty()) {
        throw ConfigError("posterior predictive needs at least one sample");
    }
    const std::size_t groups = model.population().size();
    const auto weeks = static_cast<std::size_t>(model.weeks());
    std::vector<std::vector<std::vector<double>>> mod(groups, std::vector<std::vector<double>>(weeks));
    auto pred = mod;
    std::mt19937_64 rng(seed);
    std::student_t_distribution<double> student(model.config().prior.nu);
    for (const auto& s : samples) {
        const auto st = model.simulate(s.params);
        for (std::size_t a = 0; a < groups; ++a) {
            for (std::size_t t = 0; t < weeks; ++t) {
                const double c = st.weekly_cases[a][t];
                mod[a][t].push_back(c);
                pred[a][t].push_back(c + s.kappa * std::sqrt(c + 1.0) * student(rng));
            }
        }
    }
    PredictiveBands b;
    b.model.resize(groups);
    b.predictive.resize(groups);
    for (std::size_t a = 0; a < groups; ++a) {
        for (std::size_t t = 0; t < weeks; ++t) {
            b.model[a].push_back(summarize(mod[a][t]));
            b.predictive[a].push_back(summarize(pred[a][t]));
        }
    }
    return b;
}

// ---------------------------------------------------------------------------
// Serialisation

inline nlohmann::json sample_to_json(const PosteriorSample& s)
{
    nlohmann::json j;
    j["chain"] = s.chain;
    j["draw"] = s.draw;
    j["log_posterior"] = s.log_posterior;
    j["kappa"] = s.kappa;
    j["sigma"] = s.sigma;
    j["R0"] = s.params.r0;
    std::vector<std::vector<std::array<double, 3>>> cps;
    for (const auto& row : s.params.change_points) {
        auto& out = cps.emplace_back();
        for (const auto& cp : row) {
            out.push_back({cp.effect, cp.length, cp.day});
        }
    }
    j["change_points"] = cps;
    j["influx"] = s.params.influx;
    j["protection"] = s.params.protection;
    j["theta"] = s.theta;
    return j;
}

inline PosteriorSample sample_from_json(const nlohmann::json& j)
{
    PosteriorSample s;
    s.chain = j.at("chain").get<int>();
    s.draw = j.at("draw").get<int>();
    s.log_posterior = j.at("log_posterior").get<double>();
    s.kappa = j.at("kappa").get<double>();
    s.sigma = j.at("sigma").get<std::vector<double>>();
    s.params.r0 = j.at("R0").get<std::vector<double>>();
    for (const auto& row : j.at("change_points")) {
        auto& out = s.params.change_points.emplace_back();
        for (const auto& cp : row) {
            out.push_back({cp.at(0).get<double>(), cp.at(1).get<double>(), cp.at(2).get<double>()});
        }
    }
    s.params.influx = j.at("influx").get<std::vector<std::vector<double>>>();
    s.params.protection = j.at("protection").get<std::array<double, kDoses>>();
    s.theta = j.value("theta", std::vector<double>{});
    return s;
}

inline void save_samples(const std::vector<PosteriorSample>& samples, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot write " + path.string());
    }
    for (const auto& s : samples) {
        out << sample_to_json(s).dump() << '\n';
    }
}

inline std::vector<PosteriorSample> load_samples(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    std::vector<PosteriorSample> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) {
            continue;
        }
        try {
            out.push_back(sample_from_json(nlohmann::json::parse(line)));
        }
        catch (const nlohmann::json::exception& e) {
            throw DataError(path.string() + ":" + std::to_string(n) + ": " + e.what());
        }
    }
    if (out.empty()) {
        throw DataError(path.string() + ": no posterior samples");
    }
    return out;
}

inline nlohmann::json interval_json(const Interval& i)
{
    return {{"median", i.median}, {"lo95", i.lo}, {"hi95", i.hi}};
}

inline nlohmann::json posterior_summary(const PosteriorResult& r, const std::vector<std::string>& labels, int weeks)
{
    nlohmann::json j;
    j["draws"] = r.samples.size();
    j["seconds"] = r.seconds;
    j["sampler"] = {{"chains", r.config.sampler.chains},       {"init_steps", r.config.sampler.init_steps},
                    {"keep_chains", r.config.sampler.keep_chains}, {"tune", r.config.sampler.tune},
                    {"draws", r.config.sampler.draws},         {"sweeps_per_step", r.config.sampler.sweeps_per_step},
                    {"seed", r.config.sampler.seed}};
    j["mixing"] = r.config.dynamics.mixing;
    j["change_points"] = r.config.prior.change_points;
    nlohmann::json chains = nlohmann::json::array();
    for (const auto& c : r.chains) {
        chains.push_back({{"chain", c.chain},
                          {"kept", c.kept},
                          {"init_log_posterior", c.init_log_posterior},
                          {"final_log_posterior", c.final_log_posterior},
                          {"acceptance", c.acceptance},
                          {"trace", c.trace}});
    }
    j["chains"] = chains;

    std::vector<double> kappa;
    std::vector<std::vector<double>> r0(labels.size());
    for (const auto& s : r.samples) {
        kappa.push_back(s.kappa);
        for (std::size_t a = 0; a < labels.size(); ++a) {
            r0[a].push_back(s.params.r0[a]);
        }
    }
    j["kappa"] = interval_json(summarize(kappa));
    nlohmann::json groups = nlohmann::json::object();
    const auto bands = base_reproduction_bands(r.samples, weeks);
    for (std::size_t a = 0; a < labels.size(); ++a) {
        nlohmann::json g;
        g["R0"] = interval_json(summarize(r0[a]));
        nlohmann::json weekly = nlohmann::json::array();
        for (const auto& b : bands[a]) {
            weekly.push_back(interval_json(b));
        }
        g["weekly_base_reproduction"] = weekly;
        groups[labels[a]] = g;
    }
    j["groups"] = groups;
    return j;
}

} // namespace counterfact

#endif // COUNTERFACT_INFERENCE_HPP
