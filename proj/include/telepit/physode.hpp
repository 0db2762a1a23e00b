#pragma once

#include <cstddef>
#include <string>

#include "telepit/autodiff.hpp"
#include "telepit/mlp.hpp"
#include "telepit/rng.hpp"

namespace telepit {

/// Latent transport dynamics for one frequency band: diffusion, advection
/// and forcing along the latitude dimension plus a learned correction, all
/// clamped by gamma * tanh. Each band owns its own instance so the evolution
/// stays scale-dependent.
struct OdeParams {
    Tensor nu;          ///< 1 x D diffusion strengths
    Tensor mu;          ///< 1 x D advection strengths
    Tensor forcing;     ///< 1 x D
    Tensor alpha;       ///< 1 x 1 neural-correction balance (learnable)
    MlpParams correction; ///< D -> D, hidden width D
    double gamma = 0.1; ///< rate clamp factor (hyperparameter)
    double dt = 1.0;    ///< Euler step size
    std::size_t steps = 2;

    /// Start near the identity flow: weak positive diffusion, no advection
    /// or forcing, small correction weight.
    static OdeParams make(std::size_t d, double gamma, double dt, std::size_t steps, Rng& rng) {
        OdeParams p;
        p.nu = Tensor::full({1, d}, 0.1);
        p.mu = Tensor({1, d});
        p.forcing = Tensor({1, d});
        p.alpha = Tensor::scalar(0.1);
        p.correction = MlpParams::make(d, d, d, rng);
        p.gamma = gamma;
        p.dt = dt;
        p.steps = steps;
        return p;
    }

    template <class F>
    void visit(const std::string& prefix, F&& f) {
        f(prefix + ".nu", nu);
        f(prefix + ".mu", mu);
        f(prefix + ".f", forcing);
        f(prefix + ".alpha", alpha);
        correction.visit(prefix + ".mlp", f);
    }
};

struct OdeVars {
    Tape::Id nu, mu, forcing, alpha;
    MlpVars correction;
    double gamma, dt;
    std::size_t steps;
};

inline OdeVars bind_ode(ParamBinder& b, const std::string& prefix, const OdeParams& p) {
    return {b.bind(prefix + ".nu", p.nu),
            b.bind(prefix + ".mu", p.mu),
            b.bind(prefix + ".f", p.forcing),
            b.bind(prefix + ".alpha", p.alpha),
            bind_mlp(b, prefix + ".mlp", p.correction),
            p.gamma,
            p.dt,
            p.steps};
}

/// dX/dt = gamma * tanh( nu ⊙ (x_{i+1} - 2 x_i + x_{i-1})
///                     + mu ⊙ (x_{i+1} - x_{i-1}) / 2
///                     + f + alpha * MLP(x_i) )
/// with virtual rows x_0 = x_{H+1} = 0 (zero padding at the poles). The
/// tanh clamp bounds every component strictly below gamma.
inline Tape::Id ode_rhs_forward(Tape& t, Tape::Id x, const OdeVars& v) {
    Tape::Id north = t.shift_rows(x, +1); // x_{i+1}
    Tape::Id south = t.shift_rows(x, -1); // x_{i-1}
    Tape::Id diffusion = t.mul_rowvec(t.sub(t.add(north, south), t.scale(x, 2.0)), v.nu);
    Tape::Id advection = t.mul_rowvec(t.scale(t.sub(north, south), 0.5), v.mu);
    Tape::Id inner = t.add_rowvec(t.add(diffusion, advection), v.forcing);
    inner = t.add(inner, t.scale_by(mlp_forward(t, x, v.correction), v.alpha));
    return t.scale(t.tanh_op(inner), v.gamma);
}

/// `steps` explicit Euler iterations: x <- x + dt * dx/dt.
inline Tape::Id evolve_forward(Tape& t, Tape::Id x, const OdeVars& v) {
    for (std::size_t s = 0; s < v.steps; ++s) x = t.add_scaled(x, ode_rhs_forward(t, x, v), v.dt);
    return x;
}

inline Tensor ode_rhs(const Tensor& x, const OdeParams& params) {
    x.check_finite("ode_rhs input");
    Tape tape;
    ParamBinder binder{tape};
    OdeVars vars = bind_ode(binder, "ode", params);
    Tensor out = tape.value(ode_rhs_forward(tape, tape.leaf(x), vars));
    out.check_finite("ode_rhs output");
    return out;
}

inline Tensor evolve(const Tensor& x, const OdeParams& params) {
    x.check_finite("evolve input");
    Tape tape;
    ParamBinder binder{tape};
    OdeVars vars = bind_ode(binder, "ode", params);
    Tensor out = tape.value(evolve_forward(tape, tape.leaf(x), vars));
    out.check_finite("evolve output");
    return out;
}

} // namespace telepit
