#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "telepit/model.hpp"
#include "telepit/train.hpp"

namespace telepit {

struct GradCheckGroup {
    std::string name;
    double worst_rel = 0.0; ///< max over entries of |bp-fd| / max(|fd|, floor)
    bool pass = true;
};

struct GradCheckResult {
    std::vector<GradCheckGroup> groups;
    bool all_pass = true;
};

/// The small configuration every full-model gradient check runs on.
inline ModelConfig grad_check_config() {
    ModelConfig cfg;
    cfg.n_vars = 3;
    cfg.lat = 8;
    cfg.lon = 12;
    cfg.embed_dim = 16;
    cfg.levels = 1;
    cfg.heads = 2;
    cfg.patterns = 2;
    cfg.lambda = 0.2;
    cfg.gamma = 0.1;
    cfg.ode_steps = 2;
    cfg.ode_dt = 1.0;
    return cfg;
}

struct GradCheckFixture {
    ModelParams params;
    PreparedSample sample;
};

inline GradCheckFixture make_grad_check_fixture(std::uint64_t seed = 7) {
    const ModelConfig cfg = grad_check_config();
    const Grid grid = make_grid(cfg.lat, cfg.lon);
    Rng rng(seed);
    GradCheckFixture fx;
    fx.params = make_model(cfg, grid, rng);
    Rng data_rng = rng.stream("fixture");
    fx.sample.zonal_u = Tensor({cfg.lat, cfg.n_vars});
    for (auto& v : fx.sample.zonal_u.values()) v = data_rng.normal(0.0, 1.0);
    fx.sample.targets = Tensor({cfg.lat, 2 * cfg.n_vars * cfg.lon});
    for (auto& v : fx.sample.targets.values()) v = data_rng.normal(0.0, 1.0);
    return fx;
}

/// Compare backprop gradients of the loss against central finite
/// differences for every parameter group. `perturb_group` injects an error
/// into one group's backprop gradient (the fault-injection hook used to
/// prove the check can fail).
inline GradCheckResult grad_check(ModelParams& params, const PreparedSample& sample,
                                  double eps = 1e-4, double rel_tol = 1e-2,
                                  double abs_floor = 1e-6,
                                  const std::string& perturb_group = {}) {
    std::vector<Tensor> bp_grads;
    sample_loss_and_grads(params, sample, &bp_grads);

    auto registry = param_registry(params);
    GradCheckResult result;
    bool perturb_found = perturb_group.empty();
    for (std::size_t p = 0; p < registry.size(); ++p) {
        Tensor& param = *registry[p].second;
        Tensor& bp = bp_grads[p];
        if (registry[p].first == perturb_group) {
            perturb_found = true;
            for (auto& v : bp.values()) v += 1.0;
        }
        GradCheckGroup group;
        group.name = registry[p].first;
        for (std::size_t i = 0; i < param.size(); ++i) {
            const double keep = param[i];
            param[i] = keep + eps;
            const double fp = sample_loss_and_grads(params, sample, nullptr);
            param[i] = keep - eps;
            const double fm = sample_loss_and_grads(params, sample, nullptr);
            param[i] = keep;
            const double fd = (fp - fm) / (2.0 * eps);
            const double err = std::abs(bp[i] - fd);
            const double rel = err / std::max(std::abs(fd), abs_floor);
            group.worst_rel = std::max(group.worst_rel, rel);
            if (err > std::max(abs_floor, rel_tol * std::abs(fd))) group.pass = false;
        }
        result.all_pass = result.all_pass && group.pass;
        result.groups.push_back(std::move(group));
    }
    if (!perturb_found) throw ConfigError("grad_check: unknown group '" + perturb_group + "'");
    return result;
}

} // namespace telepit
