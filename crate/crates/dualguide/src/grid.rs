//! Sweep grids such as `eta=0.1,0.5;slack=accumulated,instantaneous;R=4`.
//!
//! Axes apply to the first constraint. Cells enumerate the Cartesian product
//! with the last axis varying fastest.

use dualguide_core::{MultiplierScope, SlackMode};

use crate::config::ExperimentConfig;
use crate::error::{AppError, AppResult};

#[derive(Debug, Clone, PartialEq)]
pub enum Axis {
    Eta(Vec<f64>),
    Slack(Vec<SlackMode>),
    Target(Vec<f64>),
    Lambda0(Vec<f64>),
    Scope(Vec<MultiplierScope>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Setting {
    Eta(f64),
    Slack(SlackMode),
    Target(f64),
    Lambda0(f64),
    Scope(MultiplierScope),
}

impl Setting {
    pub fn key(&self) -> &'static str {
        match self {
            Setting::Eta(_) => "eta",
            Setting::Slack(_) => "slack",
            Setting::Target(_) => "R",
            Setting::Lambda0(_) => "lambda0",
            Setting::Scope(_) => "scope",
        }
    }

    pub fn value(&self) -> String {
        match self {
            Setting::Eta(x) | Setting::Target(x) | Setting::Lambda0(x) => x.to_string(),
            Setting::Slack(m) => m.as_str().to_string(),
            Setting::Scope(MultiplierScope::Scalar) => "scalar".into(),
            Setting::Scope(MultiplierScope::PerPosition) => "per_position".into(),
        }
    }
}

impl Axis {
    fn len(&self) -> usize {
        match self {
            Axis::Eta(v) | Axis::Target(v) | Axis::Lambda0(v) => v.len(),
            Axis::Slack(v) => v.len(),
            Axis::Scope(v) => v.len(),
        }
    }

    fn get(&self, i: usize) -> Setting {
        match self {
            Axis::Eta(v) => Setting::Eta(v[i]),
            Axis::Slack(v) => Setting::Slack(v[i]),
            Axis::Target(v) => Setting::Target(v[i]),
            Axis::Lambda0(v) => Setting::Lambda0(v[i]),
            Axis::Scope(v) => Setting::Scope(v[i]),
        }
    }
}

fn parse_list<T: std::str::FromStr>(key: &str, s: &str) -> AppResult<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|e| AppError::config(format!("grid {key}: '{}': {e}", v.trim())))
        })
        .collect()
}

pub fn parse_grid(spec: &str) -> AppResult<Vec<Axis>> {
    let mut axes = Vec::new();
    for part in spec.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (key, values) = part
            .split_once('=')
            .ok_or_else(|| AppError::config(format!("grid axis '{part}' has no '='")))?;
        let key = key.trim();
        let axis = match key {
            "eta" => Axis::Eta(parse_list(key, values)?),
            "slack" => Axis::Slack(parse_list(key, values)?),
            "R" | "target" => Axis::Target(parse_list(key, values)?),
            "lambda0" => Axis::Lambda0(parse_list(key, values)?),
            "scope" => Axis::Scope(parse_list(key, values)?),
            other => return Err(AppError::config(format!("unknown grid axis '{other}'"))),
        };
        if axes.iter().any(|a: &Axis| std::mem::discriminant(a) == std::mem::discriminant(&axis)) {
            return Err(AppError::config(format!("grid axis '{key}' given twice")));
        }
        axes.push(axis);
    }
    if axes.is_empty() {
        return Err(AppError::config("grid is empty"));
    }
    Ok(axes)
}

pub fn cells(axes: &[Axis]) -> Vec<Vec<Setting>> {
    let mut out = vec![Vec::new()];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..axis.len()).map(move |i| {
                    let mut cell = prefix.clone();
                    cell.push(axis.get(i));
                    cell
                })
            })
            .collect();
    }
    out
}

/// Copy of `config` with the cell's settings applied to the first constraint.
pub fn apply(config: &ExperimentConfig, cell: &[Setting]) -> AppResult<ExperimentConfig> {
    let mut out = config.clone();
    let c = out
        .constraints
        .first_mut()
        .ok_or_else(|| AppError::config("a sweep needs at least one constraint"))?;
    for s in cell {
        match *s {
            Setting::Eta(x) => c.eta = x,
            Setting::Slack(m) => c.slack = m,
            Setting::Target(x) => c.target = x,
            Setting::Lambda0(x) => c.lambda0 = x,
            Setting::Scope(s) => c.scope = s,
        }
    }
    Ok(out)
}
