use super::{Component, Corruption, InfluenceFunction};
use crate::dist::FactorizedDistribution;
use crate::error::Result;
use crate::params::{att_value, tsm_value, vte_parts, ParameterSpec, PointNuisance};

struct Point {
    w: usize,
    a: usize,
    y: f64,
}

fn points(p: &FactorizedDistribution, nu: &PointNuisance) -> Vec<Point> {
    let l = nu.layout;
    (0..p.num_points())
        .map(|o| Point {
            w: l.w(p, o),
            a: l.treatment(p, o),
            y: p.level_value(l.y, o),
        })
        .collect()
}

fn comps(nu: &PointNuisance, parts: Vec<(&str, Vec<f64>)>) -> Vec<Component> {
    let l = nu.layout;
    parts
        .into_iter()
        .map(|(name, values)| {
            let factors = match name {
                "W" => 0..l.a,
                "A" => l.a..l.a + 1,
                _ => l.y..l.y + 1,
            };
            Component {
                name: name.into(),
                factors,
                values,
            }
        })
        .collect()
}

pub(super) fn eif_tsm(
    p: &FactorizedDistribution,
    corruption: Option<Corruption>,
) -> Result<InfluenceFunction> {
    let nu = PointNuisance::new(p)?;
    nu.require_positivity(p.positivity_floor(), &[1])?;
    let psi = tsm_value(&nu);
    let pts = points(p, &nu);
    let y_part = pts
        .iter()
        .map(|o| {
            if o.a == 1 {
                (o.y - nu.qbar[1][o.w]) / nu.g1[o.w]
            } else {
                0.0
            }
        })
        .collect();
    let w_part = pts
        .iter()
        .map(|o| {
            if corruption == Some(Corruption::TsmDropPlugin) {
                0.0
            } else {
                nu.qbar[1][o.w] - psi
            }
        })
        .collect();
    Ok(InfluenceFunction::from_components(
        ParameterSpec::Tsm,
        psi,
        comps(&nu, vec![("W", w_part), ("Y", y_part)]),
    ))
}

pub(super) fn eif_vte(
    p: &FactorizedDistribution,
    corruption: Option<Corruption>,
) -> Result<InfluenceFunction> {
    let nu = PointNuisance::new(p)?;
    nu.require_positivity(p.positivity_floor(), &[0, 1])?;
    let (eb, psi) = vte_parts(&nu);
    let b = nu.blip();
    let factor = if corruption == Some(Corruption::VteDropFactorTwo) {
        1.0
    } else {
        2.0
    };
    let pts = points(p, &nu);
    let y_part = pts
        .iter()
        .map(|o| {
            let sign = if o.a == 1 { 1.0 } else { -1.0 };
            factor * (b[o.w] - eb) * sign / nu.g(o.a, o.w) * (o.y - nu.qbar[o.a][o.w])
        })
        .collect();
    let w_part = pts.iter().map(|o| (b[o.w] - eb).powi(2) - psi).collect();
    Ok(InfluenceFunction::from_components(
        ParameterSpec::Vte,
        psi,
        comps(&nu, vec![("W", w_part), ("Y", y_part)]),
    ))
}

pub(super) fn eif_att(
    p: &FactorizedDistribution,
    corruption: Option<Corruption>,
) -> Result<InfluenceFunction> {
    let nu = PointNuisance::new(p)?;
    let psi = att_value(&nu, p.positivity_floor())?;
    let p1 = nu.p_treated();
    let b = nu.blip();
    let pts = points(p, &nu);
    let drop_control = corruption == Some(Corruption::AttDropControlWeight);
    let y_part = pts
        .iter()
        .map(|o| {
            let weight = if o.a == 1 {
                1.0 / p1
            } else if drop_control {
                0.0
            } else {
                -nu.g1[o.w] / (p1 * nu.g(0, o.w))
            };
            weight * (o.y - nu.qbar[o.a][o.w])
        })
        .collect();
    let a_part = pts
        .iter()
        .map(|o| (o.a as f64 - nu.g1[o.w]) / p1 * (b[o.w] - psi))
        .collect();
    let w_part = pts
        .iter()
        .map(|o| nu.g1[o.w] / p1 * (b[o.w] - psi))
        .collect();
    Ok(InfluenceFunction::from_components(
        ParameterSpec::Att,
        psi,
        comps(&nu, vec![("W", w_part), ("A", a_part), ("Y", y_part)]),
    ))
}
