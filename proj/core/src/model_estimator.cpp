#include "frame_sampler/model_estimator.hpp"

#include "frame_sampler/convergence.hpp"
#include "frame_sampler/csv.hpp"
#include "frame_sampler/errors.hpp"
#include "frame_sampler/parallel.hpp"
#include "frame_sampler/stats.hpp"
#include "gibbs.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <set>

namespace frame_sampler {

std::string_view to_string(ModelFamily family) noexcept {
    switch (family) {
    case ModelFamily::hierarchical:
        return "hierarchical";
    case ModelFamily::household_regression:
        return "household_regression";
    case ModelFamily::simple_normal:
        return "simple_normal";
    }
    return "unknown";
}

ModelFamily parse_model_family(std::string_view name) {
    for (auto f : {ModelFamily::hierarchical, ModelFamily::household_regression, ModelFamily::simple_normal}) {
        if (name == to_string(f)) {
            return f;
        }
    }
    throw ConfigError("unknown model family: " + std::string{name});
}

std::string_view to_string(Covariate covariate) noexcept {
    switch (covariate) {
    case Covariate::n_total:
        return "n_total";
    case Covariate::n_total_sq:
        return "n_total_sq";
    case Covariate::n_group:
        return "n_group";
    case Covariate::n_group_sq:
        return "n_group_sq";
    }
    return "unknown";
}

void validate(const ModelSpec &spec) {
    const std::set<Covariate> unique(spec.covariates.begin(), spec.covariates.end());
    if (unique.size() != spec.covariates.size()) {
        throw ConfigError("model covariates must not repeat");
    }
    switch (spec.family) {
    case ModelFamily::hierarchical:
        break;
    case ModelFamily::household_regression:
        if (unique.contains(Covariate::n_group) || unique.contains(Covariate::n_group_sq)) {
            throw ConfigError("household-level models take only the under-50 covariates");
        }
        break;
    case ModelFamily::simple_normal:
        if (!unique.empty()) {
            throw ConfigError("the simple normal model has no covariates");
        }
        break;
    }
    if (spec.log_response && spec.family != ModelFamily::household_regression) {
        throw ConfigError("log_response applies to household-level models only");
    }
    if (spec.log_scale_estimand && !spec.log_response) {
        throw ConfigError("log_scale_estimand requires log_response");
    }
    for (const auto &fixed : {spec.fixed_sigma_y, spec.fixed_sigma_alpha, spec.fixed_sigma_t}) {
        if (fixed && !(*fixed > 0.0 && std::isfinite(*fixed))) {
            throw ConfigError("fixed standard deviations must be positive");
        }
    }
    if (!spec.prior.flat_coefficients && !(spec.prior.coefficient_sd_scale > 0.0)) {
        throw ConfigError("coefficient prior scale must be positive");
    }
    if (spec.prior.variance_shape < 0.0 || spec.prior.variance_scale < 0.0) {
        throw ConfigError("variance prior parameters must be non-negative");
    }
}

ModelSpec hierarchical_model() {
    return {};
}

ModelSpec household_model(bool log_response) {
    ModelSpec spec;
    spec.family = ModelFamily::household_regression;
    spec.covariates = {Covariate::n_total, Covariate::n_total_sq};
    spec.log_response = log_response;
    return spec;
}

ModelSpec simple_normal_model() {
    ModelSpec spec;
    spec.family = ModelFamily::simple_normal;
    spec.covariates.clear();
    spec.prior.flat_coefficients = true;
    spec.prior.variance_shape = 0.0;
    spec.prior.variance_scale = 0.0;
    return spec;
}

ModelSpec default_model_for(const SurveyModuleSpec &module, SchemeId scheme, bool log_consumption) {
    if (module.level == OutcomeLevel::household) {
        return household_model(log_consumption);
    }
    if (scheme == SchemeId::srs_persons) {
        return simple_normal_model();
    }
    return hierarchical_model();
}

void validate(const McmcSettings &settings) {
    if (settings.draws == 0 || settings.thin == 0 || settings.chains == 0) {
        throw ConfigError("MCMC draws, thinning and chains must be positive");
    }
    if (settings.draws < 4) {
        throw ConfigError("MCMC needs at least four retained draws per chain");
    }
    if (!(settings.rhat_threshold > 1.0)) {
        throw ConfigError("R-hat threshold must exceed 1");
    }
}

std::size_t ModelData::observation_count() const {
    std::size_t n = 0;
    for (const auto &group : y) {
        n += group.size();
    }
    return n;
}

ModelData make_model_data(const PopulationFrame &frame, const SurveyModuleSpec &module,
                          const WeightedSample &sample) {
    std::map<std::size_t, std::vector<double>> groups;
    for (const auto &row : sample.rows) {
        const auto h = frame.find_household(row.household_id);
        if (!h) {
            throw InputError("sample household " + std::to_string(to_int(row.household_id)) + " is not in the frame");
        }
        if (!std::isfinite(row.y)) {
            throw InputError("sample outcome is not finite");
        }
        groups[*h].push_back(row.y);
    }
    ModelData data;
    data.level = module.level;
    for (auto &[h, values] : groups) {
        if (module.level == OutcomeLevel::household && values.size() != 1) {
            throw InputError("household-level samples hold one row per household");
        }
        data.households.push_back(h);
        data.y.push_back(std::move(values));
    }
    return data;
}

WeightedSample unweighted_sample(const PopulationFrame &frame, const SurveyModuleSpec &module,
                                 const StageIISample &sample) {
    const std::vector<double> *values = nullptr;
    if (module.level == OutcomeLevel::person) {
        values = &frame.person_outcome(module.outcome_name);
    } else {
        values = &frame.household_outcome(module.outcome_name);
    }
    WeightedSample out;
    out.rows.reserve(sample.persons.size());
    for (auto p : sample.persons) {
        const auto h = frame.household_of(p);
        if (!h) {
            throw ConsistencyError("sampled person has no household");
        }
        const double y = module.level == OutcomeLevel::person ? (*values)[p] : (*values)[*h];
        if (std::isnan(y)) {
            throw ConsistencyError("sampled unit is missing outcome " + module.outcome_name);
        }
        const auto &person = frame.persons()[p];
        out.rows.push_back({person.id, person.household_id, to_int(person.household_id), y, 1.0});
    }
    return out;
}

namespace {

bool uses_group(Covariate c) { return c == Covariate::n_group || c == Covariate::n_group_sq; }
bool is_square(Covariate c) { return c == Covariate::n_total_sq || c == Covariate::n_group_sq; }

struct Moments {
    double center = 0.0;
    double scale = 1.0;
    std::size_t distinct = 0;
};

Moments describe(const std::vector<double> &values) {
    Moments m;
    if (values.empty()) {
        return m;
    }
    m.center = stats::mean(values);
    double ss = 0.0;
    for (double v : values) {
        ss += (v - m.center) * (v - m.center);
    }
    const double sd = std::sqrt(ss / static_cast<double>(values.size()));
    m.scale = sd > 0.0 ? sd : 1.0;
    m.distinct = std::set<double>(values.begin(), values.end()).size();
    return m;
}

/// Households that hold population units of the module.
std::vector<std::size_t> population_households(const GroupIndex &index) {
    std::vector<std::size_t> out;
    for (std::size_t h = 0; h < index.household_count(); ++h) {
        if (index.count(h) > 0) {
            out.push_back(h);
        }
    }
    return out;
}

} // namespace

std::vector<double> CovariateBasis::row(double n_total, double n_group) const {
    std::vector<double> x;
    x.reserve(width());
    x.push_back(1.0);
    const double zt = (n_total - total_center) / total_scale;
    const double zg = (n_group - group_center) / group_scale;
    for (auto c : active) {
        switch (c) {
        case Covariate::n_total:
            x.push_back(zt);
            break;
        case Covariate::n_total_sq:
            x.push_back(zt * zt);
            break;
        case Covariate::n_group:
            x.push_back(zg);
            break;
        case Covariate::n_group_sq:
            x.push_back(zg * zg);
            break;
        }
    }
    return x;
}

std::array<double, 5> CovariateBasis::raw_coefficients(std::span<const double> basis_coefficients) const {
    // c1 z + c2 z^2 with z = (N - c) / s expands to
    // (-c1 c / s + c2 c^2 / s^2) + N (c1 / s - 2 c2 c / s^2) + N^2 c2 / s^2.
    std::array<double, 5> raw{basis_coefficients[0], 0.0, 0.0, 0.0, 0.0};
    std::array<double, 4> on_basis{};
    for (std::size_t j = 0; j < active.size(); ++j) {
        on_basis[static_cast<std::size_t>(active[j])] = basis_coefficients[j + 1];
    }
    const std::array<std::pair<double, double>, 2> shift{{{total_center, total_scale}, {group_center, group_scale}}};
    for (std::size_t v = 0; v < 2; ++v) {
        const double c1 = on_basis[2 * v];
        const double c2 = on_basis[2 * v + 1];
        const auto [c, s] = shift[v];
        raw[0] += -c1 * c / s + c2 * c * c / (s * s);
        raw[1 + 2 * v] = c1 / s - 2.0 * c2 * c / (s * s);
        raw[2 + 2 * v] = c2 / (s * s);
    }
    return raw;
}

CovariateBasis make_basis(const PopulationFrame &frame, const GroupIndex &index, const ModelSpec &spec) {
    CovariateBasis basis;
    if (spec.covariates.empty()) {
        return basis;
    }
    std::vector<double> totals;
    std::vector<double> groups;
    bool group_equals_total = true;
    for (auto h : population_households(index)) {
        totals.push_back(frame.households()[h].n_total_under50);
        groups.push_back(static_cast<double>(index.count(h)));
        group_equals_total = group_equals_total && totals.back() == groups.back();
    }
    const auto t = describe(totals);
    const auto g = describe(groups);
    basis.total_center = t.center;
    basis.total_scale = t.scale;
    basis.group_center = g.center;
    basis.group_scale = g.scale;
    for (auto c : spec.covariates) {
        const auto &m = uses_group(c) ? g : t;
        if (uses_group(c) && group_equals_total) {
            continue;
        }
        if (m.distinct < (is_square(c) ? 3U : 2U)) {
            continue;
        }
        basis.active.push_back(c);
    }
    std::sort(basis.active.begin(), basis.active.end());
    return basis;
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct ChainState {
    VectorXd coef;
    double var_y = 1.0;
    double var_alpha = 1.0;
    VectorXd alpha;
};

struct FitInputs {
    MatrixXd x;
    /// Response per row (regression families) and its scale s_h.
    VectorXd r;
    VectorXd s;
    /// Hierarchical: per-household observation counts and sums.
    VectorXd n_h;
    VectorXd sum_h;
    const ModelData *data = nullptr;
    double prior_precision = 0.0;
    double sd_y = 1.0;
    double ybar = 0.0;
    std::size_t n_obs = 0;
};

/// Random-walk Metropolis on (log sigma_y^2, log sigma_alpha^2) targeting
/// p(sigma_y^2, sigma_alpha^2 | y, coefficients) with alpha integrated out.
/// Household h contributes its mean ybar_h ~ N(m_h, v_alpha + v_y / n_h) and
/// its within-household sum of squares ~ v_y chi^2_{n_h - 1}.
class VarianceMove {
public:
    VarianceMove(const FitInputs &in, const ModelSpec &spec, const ModelData &data)
        : in_(in), a0_(spec.prior.variance_shape), b0_(spec.prior.variance_scale),
          move_y_(!spec.fixed_sigma_y), move_alpha_(!spec.fixed_sigma_alpha),
          enabled_(spec.variance_move && spec.family == ModelFamily::hierarchical) {
        if (!enabled_) {
            return;
        }
        ybar_.resize(in.n_h.size());
        for (Eigen::Index k = 0; k < in.n_h.size(); ++k) {
            ybar_[k] = in.sum_h[k] / in.n_h[k];
            for (double y : data.y[static_cast<std::size_t>(k)]) {
                within_ss_ += (y - ybar_[k]) * (y - ybar_[k]);
            }
        }
        within_df_ = static_cast<double>(in.n_obs) - static_cast<double>(in.n_h.size());
    }

    bool active() const noexcept { return enabled_ && (move_y_ || move_alpha_); }

    void step(const VectorXd &m, double &var_y, double &var_alpha, Rng &rng) const {
        const double u = std::log(var_y);
        const double w = std::log(var_alpha);
        const double z1 = normal_draw(rng, 0.0, 1.0);
        const double z2 = normal_draw(rng, 0.0, 1.0);
        const double du = move_y_ ? chol_[0] * z1 : 0.0;
        const double dw = move_alpha_ ? chol_[1] * z1 + chol_[2] * z2 : 0.0;
        const double current = log_target(m, u, w);
        const double proposed = log_target(m, u + du, w + dw);
        if (std::log(uniform_open01(rng)) < proposed - current) {
            var_y = std::exp(u + du);
            var_alpha = std::exp(w + dw);
        }
    }

    /// Records the state and refreshes the proposal every 100 burn-in iterations.
    void adapt(std::size_t iteration, double var_y, double var_alpha) {
        history_.emplace_back(std::log(var_y), std::log(var_alpha));
        if (iteration < 199 || (iteration + 1) % 100 != 0) {
            return;
        }
        const auto start = history_.size() / 2;
        const double n = static_cast<double>(history_.size() - start);
        double mu_u = 0.0;
        double mu_w = 0.0;
        for (auto i = start; i < history_.size(); ++i) {
            mu_u += history_[i].first;
            mu_w += history_[i].second;
        }
        mu_u /= n;
        mu_w /= n;
        double suu = 0.0;
        double sww = 0.0;
        double suw = 0.0;
        for (auto i = start; i < history_.size(); ++i) {
            const double du = history_[i].first - mu_u;
            const double dw = history_[i].second - mu_w;
            suu += du * du;
            sww += dw * dw;
            suw += du * dw;
        }
        const double scale = 2.38 * 2.38 / 2.0 / (n - 1.0);
        const double cuu = scale * suu + 1e-6;
        const double cww = scale * sww + 1e-6;
        const double cuw = scale * suw;
        chol_[0] = std::sqrt(cuu);
        chol_[1] = cuw / chol_[0];
        chol_[2] = std::sqrt(std::max(cww - chol_[1] * chol_[1], 1e-6));
    }

private:
    double log_target(const VectorXd &m, double u, double w) const {
        const double v_y = std::exp(u);
        const double v_a = std::exp(w);
        double lp = -0.5 * within_df_ * u - 0.5 * within_ss_ / v_y;
        for (Eigen::Index k = 0; k < ybar_.size(); ++k) {
            const double v = v_a + v_y / in_.n_h[k];
            const double e = ybar_[k] - m[k];
            lp += -0.5 * std::log(v) - 0.5 * e * e / v;
        }
        // Inverse-gamma priors on the variances plus the log-scale Jacobian.
        lp += -a0_ * u - b0_ / v_y;
        lp += -a0_ * w - b0_ / v_a;
        return lp;
    }

    const FitInputs &in_;
    double a0_;
    double b0_;
    bool move_y_;
    bool move_alpha_;
    bool enabled_;
    VectorXd ybar_;
    double within_ss_ = 0.0;
    double within_df_ = 0.0;
    /// Lower-triangular proposal factor (l11, l21, l22).
    std::array<double, 3> chol_{0.3, 0.0, 0.3};
    std::vector<std::pair<double, double>> history_;
};

constexpr int variance_moves_per_iteration = 4;

double overdispersed_sd(Rng &rng, double sd) {
    return sd * std::exp(2.0 * uniform_open01(rng) - 1.0);
}

} // namespace

PosteriorDraws mcmc_fit(const PopulationFrame &frame, const GroupIndex &index, const ModelData &data,
                        const ModelSpec &spec, const McmcSettings &settings, std::uint64_t seed) {
    validate(spec);
    validate(settings);
    if (spec.family == ModelFamily::household_regression && data.level != OutcomeLevel::household) {
        throw InputError("household-level model needs household-level data");
    }
    if (spec.family != ModelFamily::household_regression && data.level != OutcomeLevel::person) {
        throw InputError("person-level model needs person-level data");
    }

    PosteriorDraws out;
    out.spec = spec;
    out.basis = make_basis(frame, index, spec);
    out.households = data.households;
    out.chains = settings.chains;
    out.draws_per_chain = settings.draws;
    out.burn_in = settings.burn_in;
    out.thin = settings.thin;

    FitInputs in;
    in.data = &data;
    std::vector<double> all_y;
    for (const auto &group : data.y) {
        all_y.insert(all_y.end(), group.begin(), group.end());
    }
    in.n_obs = all_y.size();

    const auto p = static_cast<Eigen::Index>(out.basis.width());
    const bool hierarchical = spec.family == ModelFamily::hierarchical;
    if (spec.family == ModelFamily::simple_normal) {
        if (in.n_obs < 2) {
            throw InputError("simple normal model needs at least two observations");
        }
        in.x = MatrixXd::Ones(static_cast<Eigen::Index>(in.n_obs), 1);
        in.r = Eigen::Map<const VectorXd>(all_y.data(), static_cast<Eigen::Index>(all_y.size()));
        in.s = VectorXd::Ones(in.r.size());
    } else {
        if (data.households.size() < 2) {
            throw InputError("model fit needs at least two sampled households");
        }
        const auto rows = static_cast<Eigen::Index>(data.households.size());
        in.x.resize(rows, p);
        for (Eigen::Index k = 0; k < rows; ++k) {
            const auto h = data.households[static_cast<std::size_t>(k)];
            if (h >= frame.household_count() || data.y[static_cast<std::size_t>(k)].empty()) {
                throw InputError("model data group does not match the frame");
            }
            const auto x = out.basis.row(frame.households()[h].n_total_under50, static_cast<double>(index.count(h)));
            in.x.row(k) = Eigen::Map<const VectorXd>(x.data(), p).transpose();
        }
        if (hierarchical) {
            in.n_h.resize(rows);
            in.sum_h.resize(rows);
            for (Eigen::Index k = 0; k < rows; ++k) {
                const auto &g = data.y[static_cast<std::size_t>(k)];
                in.n_h[k] = static_cast<double>(g.size());
                in.sum_h[k] = std::accumulate(g.begin(), g.end(), 0.0);
            }
        } else {
            in.r.resize(rows);
            in.s.resize(rows);
            for (Eigen::Index k = 0; k < rows; ++k) {
                const double t = data.y[static_cast<std::size_t>(k)].front();
                if (spec.log_response) {
                    if (!(t > 0.0)) {
                        throw InputError("log-scale household model needs positive outcomes");
                    }
                    in.r[k] = std::log(t);
                    in.s[k] = 1.0;
                } else {
                    in.r[k] = t;
                    const auto n_total = frame.households()[data.households[static_cast<std::size_t>(k)]].n_total_under50;
                    in.s[k] = std::max(n_total, 1);
                }
            }
            all_y.assign(in.r.data(), in.r.data() + in.r.size());
        }
    }
    in.ybar = stats::mean(all_y);
    const double sd = all_y.size() > 1 ? std::sqrt(stats::variance(all_y)) : 0.0;
    in.sd_y = sd > 0.0 ? sd : 1.0;
    if (!spec.prior.flat_coefficients) {
        const double tau = spec.prior.coefficient_sd_scale * in.sd_y;
        in.prior_precision = 1.0 / (tau * tau);
    }

    const double a0 = spec.prior.variance_shape;
    const double b0 = spec.prior.variance_scale;
    const std::size_t total = settings.chains * settings.draws;
    out.basis_coefficients.resize(total);
    out.coefficients.resize(total);
    out.sigma_y.assign(total, 0.0);
    out.sigma_alpha.assign(total, 0.0);
    out.sigma_t.assign(total, 0.0);
    if (hierarchical) {
        out.alpha.resize(total);
    }

    const MatrixXd prior_block = in.prior_precision * MatrixXd::Identity(in.x.cols(), in.x.cols());
    // Regression families: rows divided by their scale.
    MatrixXd xw;
    VectorXd rw;
    if (!hierarchical) {
        xw = in.x.array().colwise() / in.s.array();
        rw = in.r.array() / in.s.array();
    }
    const MatrixXd xtx = hierarchical ? MatrixXd(in.x.transpose() * in.x) : MatrixXd(xw.transpose() * xw);
    const VectorXd xtr = hierarchical ? VectorXd() : VectorXd(xw.transpose() * rw);

    for (std::size_t c = 0; c < settings.chains; ++c) {
        Rng rng{derive_seed(seed, c)};
        ChainState st;
        st.coef = VectorXd::Zero(in.x.cols());
        st.coef[0] = in.ybar + 0.5 * in.sd_y * normal_draw(rng, 0.0, 1.0);
        const double v_init = overdispersed_sd(rng, in.sd_y);
        const double va_init = overdispersed_sd(rng, in.sd_y);
        if (hierarchical) {
            st.var_y = spec.fixed_sigma_y ? *spec.fixed_sigma_y * *spec.fixed_sigma_y : v_init * v_init;
            st.var_alpha = spec.fixed_sigma_alpha ? *spec.fixed_sigma_alpha * *spec.fixed_sigma_alpha : va_init * va_init;
            st.alpha = VectorXd::Zero(in.x.rows());
        } else {
            const auto &fixed = spec.family == ModelFamily::simple_normal ? spec.fixed_sigma_y : spec.fixed_sigma_t;
            st.var_y = fixed ? *fixed * *fixed : v_init * v_init;
        }

        const std::size_t iterations = settings.burn_in + settings.draws * settings.thin;
        VarianceMove move(in, spec, data);
        std::size_t kept = 0;
        for (std::size_t it = 0; it < iterations; ++it) {
            if (hierarchical) {
                const VectorXd m = in.x * st.coef;
                if (move.active()) {
                    for (int k = 0; k < variance_moves_per_iteration; ++k) {
                        move.step(m, st.var_y, st.var_alpha, rng);
                    }
                    if (it < settings.burn_in) {
                        move.adapt(it, st.var_y, st.var_alpha);
                    }
                }
                for (Eigen::Index k = 0; k < st.alpha.size(); ++k) {
                    const auto cond = gibbs::alpha_conditional(in.n_h[k], in.sum_h[k], m[k], st.var_y, st.var_alpha);
                    st.alpha[k] = normal_draw(rng, cond.mean, cond.sd);
                }
                const MatrixXd q = xtx / st.var_alpha + prior_block;
                const VectorXd b = in.x.transpose() * st.alpha / st.var_alpha;
                st.coef = gibbs::draw_gaussian(q, b, rng);
                if (!spec.fixed_sigma_y) {
                    double ss = 0.0;
                    for (std::size_t k = 0; k < data.y.size(); ++k) {
                        for (double y : data.y[k]) {
                            const double e = y - st.alpha[static_cast<Eigen::Index>(k)];
                            ss += e * e;
                        }
                    }
                    st.var_y = gibbs::draw_variance(rng, a0, b0, static_cast<double>(in.n_obs), ss);
                }
                if (!spec.fixed_sigma_alpha) {
                    const double ss = (st.alpha - in.x * st.coef).squaredNorm();
                    st.var_alpha = gibbs::draw_variance(rng, a0, b0, static_cast<double>(st.alpha.size()), ss);
                }
            } else {
                const MatrixXd q = xtx / st.var_y + prior_block;
                st.coef = gibbs::draw_gaussian(q, xtr / st.var_y, rng);
                const bool fixed =
                    spec.family == ModelFamily::simple_normal ? spec.fixed_sigma_y.has_value() : spec.fixed_sigma_t.has_value();
                if (!fixed) {
                    const double ss = (rw - xw * st.coef).squaredNorm();
                    st.var_y = gibbs::draw_variance(rng, a0, b0, static_cast<double>(rw.size()), ss);
                }
            }
            if (!std::isfinite(st.var_y) || !(st.var_y > 0.0) || !std::isfinite(st.var_alpha) || !(st.var_alpha > 0.0)) {
                throw EstimationError("variance draw left the positive reals");
            }

            if (it < settings.burn_in || (it - settings.burn_in) % settings.thin != 0) {
                continue;
            }
            const auto s = c * settings.draws + kept++;
            out.basis_coefficients[s].assign(st.coef.data(), st.coef.data() + st.coef.size());
            out.coefficients[s] = out.basis.raw_coefficients(out.basis_coefficients[s]);
            if (hierarchical) {
                out.sigma_y[s] = std::sqrt(st.var_y);
                out.sigma_alpha[s] = std::sqrt(st.var_alpha);
                out.alpha[s].assign(st.alpha.data(), st.alpha.data() + st.alpha.size());
            } else if (spec.family == ModelFamily::simple_normal) {
                out.sigma_y[s] = std::sqrt(st.var_y);
            } else {
                out.sigma_t[s] = std::sqrt(st.var_y);
            }
        }
    }

    auto by_chain = [&](auto &&value) {
        std::vector<std::vector<double>> chains(settings.chains);
        for (std::size_t c = 0; c < settings.chains; ++c) {
            for (std::size_t i = 0; i < settings.draws; ++i) {
                chains[c].push_back(value(c * settings.draws + i));
            }
        }
        return chains;
    };
    auto diagnose = [&](std::string name, auto &&value) {
        const auto chains = by_chain(value);
        ParameterDiagnostic d{std::move(name), split_rhat(chains), bulk_ess(chains)};
        out.max_rhat = std::max(out.max_rhat, d.rhat);
        out.diagnostics.push_back(std::move(d));
    };
    diagnose("mu", [&](std::size_t s) { return out.coefficients[s][0]; });
    for (auto cov : out.basis.active) {
        const auto j = static_cast<std::size_t>(cov) + 1;
        diagnose(std::string{coefficient_names[j]}, [&, j](std::size_t s) { return out.coefficients[s][j]; });
    }
    if (hierarchical) {
        if (!spec.fixed_sigma_y) {
            diagnose("sigma_y", [&](std::size_t s) { return out.sigma_y[s]; });
        }
        if (!spec.fixed_sigma_alpha) {
            diagnose("sigma_alpha", [&](std::size_t s) { return out.sigma_alpha[s]; });
        }
    } else if (spec.family == ModelFamily::simple_normal) {
        if (!spec.fixed_sigma_y) {
            diagnose("sigma_y", [&](std::size_t s) { return out.sigma_y[s]; });
        }
    } else if (!spec.fixed_sigma_t) {
        diagnose("sigma_t", [&](std::size_t s) { return out.sigma_t[s]; });
    }
    out.converged = out.max_rhat <= settings.rhat_threshold;
    return out;
}

void write_draws_csv(std::ostream &out, const PosteriorDraws &posterior) {
    out << "chain,iter,param,value\n";
    auto emit = [&](std::size_t c, std::size_t i, std::string_view name, double value) {
        out << c << ',' << i << ',' << name << ',' << csv::format_double(value) << '\n';
    };
    for (std::size_t c = 0; c < posterior.chains; ++c) {
        for (std::size_t i = 0; i < posterior.draws_per_chain; ++i) {
            const auto s = c * posterior.draws_per_chain + i;
            emit(c, i, coefficient_names[0], posterior.coefficients[s][0]);
            for (auto cov : posterior.basis.active) {
                const auto j = static_cast<std::size_t>(cov) + 1;
                emit(c, i, coefficient_names[j], posterior.coefficients[s][j]);
            }
            switch (posterior.spec.family) {
            case ModelFamily::hierarchical:
                emit(c, i, "sigma_y", posterior.sigma_y[s]);
                emit(c, i, "sigma_alpha", posterior.sigma_alpha[s]);
                break;
            case ModelFamily::simple_normal:
                emit(c, i, "sigma_y", posterior.sigma_y[s]);
                break;
            case ModelFamily::household_regression:
                emit(c, i, "sigma_t", posterior.sigma_t[s]);
                break;
            }
        }
    }
}

namespace {

void summarize(FinitePopPosterior &fp) {
    fp.mean = stats::mean(fp.draws);
    const bool constant = std::all_of(fp.draws.begin(), fp.draws.end(), [&](double v) { return v == fp.draws.front(); });
    fp.variance = constant ? 0.0 : stats::variance(fp.draws);
    if (constant) {
        fp.mean = fp.draws.front();
    }
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

} // namespace

FinitePopPosterior finite_population_mean_draws(const PosteriorDraws &posterior, const PopulationFrame &frame,
                                                const GroupIndex &index, const ModelData &data, Rng &rng) {
    const auto S = posterior.size();
    if (S < 100) {
        throw InputError("finite-population draws need at least 100 posterior draws");
    }
    if (index.household_count() != frame.household_count()) {
        throw InputError("group index does not belong to the frame");
    }
    if (posterior.households != data.households && posterior.spec.family != ModelFamily::simple_normal) {
        throw InputError("posterior was fitted to different households");
    }

    FinitePopPosterior fp;
    fp.draws.resize(S);
    fp.imputed_mean.resize(S);
    const auto family = posterior.spec.family;
    const bool household_level = family == ModelFamily::household_regression;

    std::vector<bool> sampled(frame.household_count(), false);
    for (auto h : data.households) {
        if (h >= frame.household_count() || index.count(h) == 0) {
            throw InputError("sampled household holds no population units of the module");
        }
        sampled[h] = true;
    }
    const auto units = population_households(index);
    fp.population_count = household_level ? units.size() : index.total();

    double observed_total = 0.0;
    std::vector<double> missing_per_household(data.households.size(), 0.0);
    for (std::size_t k = 0; k < data.y.size(); ++k) {
        for (double y : data.y[k]) {
            observed_total += household_level && posterior.spec.log_scale_estimand ? std::log(y) : y;
        }
        fp.observed_count += data.y[k].size();
        const auto n_h = static_cast<double>(index.count(data.households[k]));
        const auto observed = static_cast<double>(data.y[k].size());
        if (!household_level && observed > n_h) {
            throw InputError("more observations than eligible members in a household");
        }
        missing_per_household[k] = household_level ? 0.0 : n_h - observed;
    }
    if (fp.observed_count > fp.population_count) {
        throw InputError("sample is larger than the population");
    }
    fp.observed_mean = fp.observed_count > 0 ? observed_total / static_cast<double>(fp.observed_count) : 0.0;
    const auto missing = static_cast<double>(fp.population_count - fp.observed_count);
    const double N = static_cast<double>(fp.population_count);

    std::vector<std::size_t> unsampled;
    for (auto h : units) {
        if (!sampled[h]) {
            unsampled.push_back(h);
        }
    }
    const auto &basis = posterior.basis;
    std::vector<double> sum_x(basis.width(), 0.0);
    std::vector<std::vector<double>> rows;
    double sum_sq_size = 0.0;
    double sum_size = 0.0;
    for (auto h : unsampled) {
        const double n_total = frame.households()[h].n_total_under50;
        const auto x = basis.row(n_total, static_cast<double>(index.count(h)));
        const double size = household_level ? 1.0 : static_cast<double>(index.count(h));
        const double scale = household_level && !posterior.spec.log_response ? n_total : size;
        for (std::size_t j = 0; j < x.size(); ++j) {
            sum_x[j] += size * x[j];
        }
        sum_size += size;
        sum_sq_size += scale * scale;
        if (household_level && posterior.spec.log_response && !posterior.spec.log_scale_estimand) {
            rows.push_back(x);
        }
    }
    double missing_in_sampled = 0.0;
    for (double m : missing_per_household) {
        missing_in_sampled += m;
    }

    for (std::size_t s = 0; s < S; ++s) {
        const auto &coef = posterior.basis_coefficients[s];
        double imputed = 0.0;
        switch (family) {
        case ModelFamily::hierarchical: {
            const auto &alpha = posterior.alpha[s];
            for (std::size_t k = 0; k < alpha.size(); ++k) {
                imputed += missing_per_household[k] * alpha[k];
            }
            // Unsampled households: sum_h N_h alpha_h with alpha_h ~ N(x_h c, sigma_alpha).
            imputed += normal_draw(rng, dot(sum_x, coef), posterior.sigma_alpha[s] * std::sqrt(sum_sq_size));
            imputed += normal_draw(rng, 0.0, posterior.sigma_y[s] * std::sqrt(missing_in_sampled + sum_size));
            break;
        }
        case ModelFamily::simple_normal:
            imputed = normal_draw(rng, missing * coef[0], posterior.sigma_y[s] * std::sqrt(missing));
            break;
        case ModelFamily::household_regression:
            if (rows.empty()) {
                imputed = normal_draw(rng, dot(sum_x, coef), posterior.sigma_t[s] * std::sqrt(sum_sq_size));
            } else {
                for (const auto &x : rows) {
                    imputed += std::exp(normal_draw(rng, dot(x, coef), posterior.sigma_t[s]));
                }
            }
            break;
        }
        fp.imputed_mean[s] = missing > 0.0 ? imputed / missing : 0.0;
        fp.draws[s] = (observed_total + imputed) / N;
        if (!std::isfinite(fp.draws[s])) {
            throw EstimationError("finite-population draw is not finite");
        }
    }
    summarize(fp);
    return fp;
}

double srs_fpc_variance(std::span<const double> population_values, std::size_t n) {
    const auto N = population_values.size();
    if (n < 2 || n > N) {
        throw InputError("srs_fpc_variance needs 2 <= n <= N");
    }
    if (n == N) {
        return 0.0;
    }
    const double s2 = stats::variance(population_values);
    return (1.0 - static_cast<double>(n) / static_cast<double>(N)) * s2 / static_cast<double>(n);
}

ModelDesignEffect model_design_effect(const FinitePopPosterior &fp, std::span<const double> population_values,
                                      std::size_t n) {
    const double v = srs_fpc_variance(population_values, n);
    if (!(v > 0.0)) {
        throw EstimationError("model design effect: reference variance is zero");
    }
    ModelDesignEffect out;
    out.deff = fp.variance / v;
    if (out.deff > 0.0) {
        out.n_eff = static_cast<double>(n) / out.deff;
    }
    return out;
}

std::vector<double> population_values(const PopulationFrame &frame, const GroupIndex &index,
                                      const SurveyModuleSpec &module) {
    std::vector<double> out;
    if (module.level == OutcomeLevel::household) {
        const auto &t = frame.household_outcome(module.outcome_name);
        for (auto h : population_households(index)) {
            out.push_back(t[h]);
        }
    } else {
        const auto &y = frame.person_outcome(module.outcome_name);
        for (std::size_t h = 0; h < index.household_count(); ++h) {
            for (auto p : index.eligible(h)) {
                out.push_back(y[p]);
            }
        }
    }
    if (std::any_of(out.begin(), out.end(), [](double v) { return std::isnan(v); })) {
        throw ConsistencyError("population is missing outcome " + module.outcome_name);
    }
    return out;
}

CalibrationReport calibration_study(const PopulationFrame &frame, const SamplingPlan &plan, const ModelSpec &spec,
                                    const McmcSettings &settings, std::size_t replications, std::uint64_t seed,
                                    std::size_t threads) {
    if (replications < 2) {
        throw InputError("calibration needs at least two replications");
    }
    validate(plan);
    validate(spec);
    validate(settings);
    const GroupIndex index(frame, plan.module.target_group);
    const auto values = population_values(frame, index, plan.module);

    CalibrationReport report;
    report.scheme = plan.scheme;
    report.module_name = plan.module.module_name;
    report.true_mean = stats::mean(values);
    report.records.resize(replications);

    parallel_for(replications, threads, [&](std::size_t r) {
        auto &record = report.records[r];
        record.rep = r;
        try {
            auto rep_plan = plan;
            rep_plan.seed = derive_seed(seed, r);
            const auto drawn = draw_plan(frame, index, rep_plan);
            const auto data = make_model_data(frame, plan.module, unweighted_sample(frame, plan.module, drawn.stage_ii));
            const auto posterior = mcmc_fit(frame, index, data, spec, settings, derive_seed(derive_seed(seed, "fit"), r));
            Rng rng{derive_seed(derive_seed(seed, "impute"), r)};
            const auto fp = finite_population_mean_draws(posterior, frame, index, data, rng);
            record.posterior_mean = fp.mean;
            record.posterior_variance = fp.variance;
            if (!posterior.converged) {
                record.flags = "rhat";
            }
        } catch (const std::runtime_error &e) {
            record.posterior_mean = std::numeric_limits<double>::quiet_NaN();
            record.posterior_variance = std::numeric_limits<double>::quiet_NaN();
            record.flags = std::string{"failed: "} + e.what();
        } catch (const std::logic_error &e) {
            record.posterior_mean = std::numeric_limits<double>::quiet_NaN();
            record.posterior_variance = std::numeric_limits<double>::quiet_NaN();
            record.flags = std::string{"failed: "} + e.what();
        }
    });

    std::vector<double> means;
    std::vector<double> variances;
    for (const auto &record : report.records) {
        if (std::isnan(record.posterior_mean)) {
            ++report.failures;
            continue;
        }
        means.push_back(record.posterior_mean);
        variances.push_back(record.posterior_variance);
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    report.variance_of_means = means.size() > 1 ? stats::variance(means) : nan;
    report.mean_posterior_variance = variances.empty() ? nan : stats::mean(variances);
    report.ratio = report.variance_of_means > 0.0 ? report.mean_posterior_variance / report.variance_of_means : nan;
    if (plan.scheme == SchemeId::srs_persons) {
        const auto n = std::min<std::size_t>(static_cast<std::size_t>(plan.module.n_target), values.size());
        if (n >= 2) {
            report.srs_fpc_reference = srs_fpc_variance(values, n);
            if (!variances.empty()) {
                const auto below = std::count_if(variances.begin(), variances.end(),
                                                 [&](double v) { return v <= *report.srs_fpc_reference; });
                report.reference_quantile = static_cast<double>(below) / static_cast<double>(variances.size());
            }
        }
    }
    return report;
}

void write_calibration_csv(std::ostream &out, const CalibrationReport &report) {
    out << "rep,posterior_mean,posterior_variance,flags\n";
    for (const auto &r : report.records) {
        auto flags = r.flags;
        std::replace_if(flags.begin(), flags.end(), [](char c) { return c == ',' || c == '\n' || c == '\r'; }, ' ');
        csv::write_row(out, {std::to_string(r.rep), csv::format_double(r.posterior_mean),
                             csv::format_double(r.posterior_variance), flags});
    }
    auto line = [&](std::string_view key, const std::string &value) { out << "# " << key << ',' << value << '\n'; };
    line("scheme", std::string{to_string(report.scheme)});
    line("module", report.module_name);
    line("replications", std::to_string(report.records.size()));
    line("failures", std::to_string(report.failures));
    line("true_mean", csv::format_double(report.true_mean));
    line("variance_of_posterior_means", csv::format_double(report.variance_of_means));
    line("mean_posterior_variance", csv::format_double(report.mean_posterior_variance));
    line("ratio", csv::format_double(report.ratio));
    if (report.srs_fpc_reference) {
        line("srs_fpc_reference", csv::format_double(*report.srs_fpc_reference));
    }
    if (report.reference_quantile) {
        line("srs_fpc_reference_quantile", csv::format_double(*report.reference_quantile));
    }
}

} // namespace frame_sampler
