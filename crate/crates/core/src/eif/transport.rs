use super::{project_to_restricted, Component, Corruption, InfluenceFunction, Restriction};
use crate::dist::FactorizedDistribution;
use crate::error::Result;
use crate::params::{ParameterSpec, TransportModel, TransportNuisance};

pub(super) fn eif_transport_sde(
    p: &FactorizedDistribution,
    spec: &ParameterSpec,
    corruption: Option<Corruption>,
) -> Result<InfluenceFunction> {
    let nu = TransportNuisance::new(p, spec, true)?;
    let l = nu.layout;
    let psi = nu.psi();
    let p0 = nu.ps[0];
    let restricted = nu.model == TransportModel::Restricted;
    let n = p.num_points();
    let mut y_full = vec![0.0; n];
    let mut y_r = vec![0.0; n];
    let mut m_full = vec![0.0; n];
    let mut m_r = vec![0.0; n];
    let mut z_part = vec![0.0; n];
    let mut w_part = vec![0.0; n];
    for o in 0..n {
        let (s, w, a, z, m) = l.coords(p, o);
        let y = p.level_value(l.y, o);
        if s == 1 {
            let resid = y - nu.qbar(m, z, a, w, 1);
            let common = nu.ghat[w][m] * nu.p_z(z, nu.a, w, 0) * nu.p_s_given_w(0, w)
                / (nu.g_m(m, z, a, w, 1) * nu.p_s_given_w(1, w) * p0);
            if a == nu.a {
                y_full[o] = resid * common / (nu.p_z(z, a, w, 1) * nu.g_a(a, w, 1));
            }
            y_r[o] = resid * common / nu.p_z_marginal(z, w, 1);
        } else {
            if a == nu.a {
                z_part[o] = (nu.qbar_m(z, w) - nu.qbar_z(w, 0)) / (nu.g_a(a, w, 0) * p0);
            }
            w_part[o] = (nu.qbar_z(w, 0) - psi) / p0;
        }
        if nu.fixed && s == nu.s_star {
            let scale = nu.p_s_given_w(0, w) / (nu.p_s_given_w(s, w) * p0);
            let q_diff = nu.qbar_a0(1, w) - nu.qbar_a0(0, w);
            let m_resid = m as f64 - nu.g_m(1, z, a, w, s);
            if a == nu.a_star {
                let ga = nu.g_a(a, w, s);
                m_full[o] = m_resid * q_diff * scale / ga;
                let qz_diff = nu.qbar_a0_z(1, a, w, s) - nu.qbar_a0_z(0, a, w, s);
                z_part[o] += (z as f64 - nu.p_z(1, a, w, s)) * qz_diff * scale / ga;
            }
            m_r[o] =
                m_resid * q_diff * scale * nu.p_z(z, nu.a_star, w, s) / nu.p_z_marginal(z, w, s);
        }
    }

    let mut discrepancy = None;
    if restricted {
        let dropped = vec![l.a];
        let gen_y = project_to_restricted(
            p,
            &y_full,
            &Restriction {
                child: l.y,
                dropped: dropped.clone(),
            },
        )?;
        let mut gap = support_gap(p, &gen_y, &y_r);
        if nu.fixed {
            let gen_m = project_to_restricted(
                p,
                &m_full,
                &Restriction {
                    child: l.m,
                    dropped,
                },
            )?;
            gap = gap.max(support_gap(p, &gen_m, &m_r));
        }
        discrepancy = Some(gap);
    }
    let (y_part, m_part) = if restricted {
        (y_r, m_r)
    } else {
        (y_full, m_full)
    };
    if corruption == Some(Corruption::TransportDropZ) {
        z_part.iter_mut().for_each(|v| *v = 0.0);
    }

    let mut components = vec![
        Component {
            name: "W".into(),
            factors: 1..1 + l.w_vars,
            values: w_part,
        },
        Component {
            name: "Z".into(),
            factors: l.z..l.z + 1,
            values: z_part,
        },
    ];
    if nu.fixed {
        components.push(Component {
            name: "M".into(),
            factors: l.m..l.m + 1,
            values: m_part,
        });
    }
    components.push(Component {
        name: "Y".into(),
        factors: l.y..l.y + 1,
        values: y_part,
    });
    let mut d = InfluenceFunction::from_components(spec.clone(), psi, components);
    d.restricted_discrepancy = discrepancy;
    Ok(d)
}

fn support_gap(p: &FactorizedDistribution, a: &[f64], b: &[f64]) -> f64 {
    (0..p.num_points())
        .filter(|&o| p.joint()[o] > 0.0)
        .map(|o| (a[o] - b[o]).abs())
        .fold(0.0, f64::max)
}
