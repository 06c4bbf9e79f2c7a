"""Independent straight-line transcriptions used as test oracles.

Nothing here imports the package's model code; parameters arrive as a
plain dict so a typo in the package cannot leak into its own oracle.
"""
import math


def table2(**over):
    p = dict(n_cell=45, u_limit=2.1, rho1=3.11, rho2=-0.025, u_rev=1.229 * 45, r_th=0.054,
             c_th=15000.0, eta_f=1.0, z_h=2.0, faraday=96485.0, gas_const=8.314,
             pressure=1e5, v_an=0.005, v_sep_g=3e-5, tau_sep_l=120.0, v_lye=1e-4,
             cross_c0=4.7e-6, cross_c1=2.8477e-7, hto_max=0.02, t_off=0.0)
    p.update(over)
    return p


def euler(p, t, n_an, n_sl, n_sg, i, t_a, dt):
    """Returns the unclamped next (T, n_an, n_sl, n_sg)."""
    t_new = t + dt * (-(t - t_a) / (p["r_th"] * p["c_th"])
                      + (p["rho1"] + p["rho2"] * t) * i ** 2 / p["c_th"])
    cross = p["cross_c0"] + p["cross_c1"] * i
    an_new = n_an + dt * cross - dt * n_an * p["v_lye"] / (2 * p["v_an"])
    sl_new = n_sl + dt * n_an * p["v_lye"] / (2 * p["v_an"]) - dt * n_sl / p["tau_sep_l"]
    tk = t + p["t_off"]
    o2 = p["eta_f"] * p["n_cell"] * i / (2 * p["z_h"] * p["faraday"])
    sg_new = n_sg + dt * n_sl / p["tau_sep_l"] - dt * o2 * n_sg * tk * p["gas_const"] / (
        p["pressure"] * p["v_sep_g"])
    return t_new, an_new, sl_new, sg_new


def hto(p, t, n_sg):
    return (t + p["t_off"]) * n_sg * p["gas_const"] / (p["pressure"] * p["v_sep_g"])


def cbf(p, t, n_sl, n_sg, t_a, alpha, dt):
    th = t + p["t_off"]
    a = t - dt * (t - t_a) / (p["r_th"] * p["c_th"]) + p["t_off"]
    b = dt * (p["rho1"] + p["rho2"] * t) / p["c_th"]
    c = n_sg + dt * n_sl / p["tau_sep_l"]
    d = (p["eta_f"] * p["n_cell"] * dt / (2 * p["z_h"] * p["faraday"])) * n_sg * th * \
        p["gas_const"] / (p["pressure"] * p["v_sep_g"])
    k41 = (1 - alpha) * th * n_sg + alpha * p["hto_max"] * p["pressure"] * p["v_sep_g"] / p["gas_const"]
    return b * d, b * c, a * d, k41, a * c


def steady_t(p, u, t_a):
    return (t_a + p["r_th"] * p["rho1"] * u * u) / (1 - p["r_th"] * p["rho2"] * u * u)


def steady_h(p, u, t_a):
    t = steady_t(p, u, t_a)
    return (p["u_rev"] + (p["rho1"] + p["rho2"] * t) * u) * u


def steady_grad_fd(p, u, t_a, h=1e-5):
    return (steady_h(p, u + h, t_a) - steady_h(p, u - h, t_a)) / (2 * h)


def fo_step(p, us, t_a, w, eps, dt):
    e = sum(steady_h(p, u, t_a) for u in us) - w
    out = []
    for u in us:
        den = 1 - p["r_th"] * p["rho2"] * u * u
        g = p["u_rev"] + 2 * (p["rho1"] + p["rho2"] * t_a) * u / den ** 2
        out.append(u - eps * dt * g * e)
    return out


def nearest_rank(xs, q):
    s = sorted(xs)
    return s[max(1, math.ceil(q * len(s))) - 1]

