//! Profile-specification strings: either a path to a tabulated-profile CSV
//! file or `family:key=value,...`.

use crate::{CliError, CliResult};
use kryloscope::profile::LanczosProfile;
use std::collections::BTreeMap;
use std::path::Path;

/// Parse `<file|family:params>`.
///
/// Families: `sqrt:g=`, `su11:alpha=,k=`, `linear:alpha=[,gamma=]`,
/// `logdrift:alpha=,beta=`, `marginal:alpha=,epsilon=`,
/// `power:amplitude=,gamma=`, `crossover:alpha=,gamma=,nstar=`.
pub fn parse_profile(spec: &str) -> CliResult<LanczosProfile> {
    if Path::new(spec).exists() {
        return LanczosProfile::read_csv_file(spec).map_err(CliError::from);
    }
    let (family, rest) = spec
        .split_once(':')
        .ok_or_else(|| CliError::Config(format!("profile `{spec}` is neither a file nor a family spec")))?;
    let mut params: BTreeMap<String, f64> = BTreeMap::new();
    if !rest.trim().is_empty() {
        for item in rest.split(',') {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("bad parameter `{item}` in `{spec}`")))?;
            let value: f64 = value.trim().parse().map_err(|e| {
                CliError::Config(format!("bad value for `{key}` in `{spec}`: {e}"))
            })?;
            params.insert(key.trim().to_string(), value);
        }
    }
    fn take(params: &mut BTreeMap<String, f64>, family: &str, key: &str) -> CliResult<f64> {
        params
            .remove(key)
            .ok_or_else(|| CliError::Config(format!("family `{family}` needs parameter `{key}`")))
    }
    let p = &mut params;
    let profile = match family {
        "sqrt" | "sqrt_hopping" => LanczosProfile::sqrt_hopping(take(p, family, "g")?),
        "su11" => LanczosProfile::su11(take(p, family, "alpha")?, take(p, family, "k")?),
        "linear" | "linear_shift" => {
            let alpha = take(p, family, "alpha")?;
            let gamma = p.remove("gamma").unwrap_or(0.0);
            LanczosProfile::linear_shift(alpha, gamma)
        }
        "logdrift" | "log_drift" => {
            LanczosProfile::log_drift(take(p, family, "alpha")?, take(p, family, "beta")?)
        }
        "marginal" => {
            LanczosProfile::marginal(take(p, family, "alpha")?, take(p, family, "epsilon")?)
        }
        "power" | "power_law" => {
            LanczosProfile::power_law(take(p, family, "amplitude")?, take(p, family, "gamma")?)
        }
        "crossover" => {
            let alpha = take(p, family, "alpha")?;
            let gamma = p.remove("gamma").unwrap_or(0.0);
            LanczosProfile::crossover(alpha, gamma, take(p, family, "nstar")?)
        }
        other => {
            return Err(CliError::Config(format!("unknown profile family `{other}`")));
        }
    }
    .map_err(CliError::from)?;
    if let Some(extra) = params.keys().next() {
        return Err(CliError::Config(format!(
            "unknown parameter `{extra}` for family `{family}`"
        )));
    }
    Ok(profile)
}

/// Parse a noise-kernel spec: `identity`, `zero`, inline `dnn,dnp,dpp`,
/// or a file containing those three entries.
pub fn parse_noise(spec: &str) -> CliResult<kryloscope::fluctuations::NoiseKernel> {
    use kryloscope::fluctuations::NoiseKernel;
    match spec.trim() {
        "identity" => Ok(NoiseKernel::identity()),
        "zero" => Ok(NoiseKernel::zero()),
        path if Path::new(path).exists() => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read noise file {path}: {e}")))?;
            let entries: Vec<&str> = text.split([',', ' ', '\n', '\t']).filter(|s| !s.is_empty()).collect();
            parse_noise(&entries.join(","))
        }
        other => {
            let parts: Vec<&str> = other.split(',').collect();
            if parts.len() != 3 {
                return Err(CliError::Config(format!(
                    "noise `{other}` must be `identity`, `zero`, or `dnn,dnp,dpp`"
                )));
            }
            let vals: Vec<f64> = parts
                .iter()
                .map(|s| {
                    s.trim()
                        .parse()
                        .map_err(|e| CliError::Config(format!("bad noise entry `{s}`: {e}")))
                })
                .collect::<CliResult<_>>()?;
            NoiseKernel::new(vals[0], vals[1], vals[2]).map_err(CliError::from)
        }
    }
}

/// Parse a comma-separated float list.
pub fn parse_grid(spec: &str) -> CliResult<Vec<f64>> {
    spec.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|e| CliError::Config(format!("bad grid entry `{s}`: {e}")))
        })
        .collect()
}
