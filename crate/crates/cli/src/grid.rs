use crate::error::CliError;

/// Parses `start:end:step` (end included when it lies on the step within
/// 1e-12) or `start:end`, which yields 41 evenly spaced points.
pub fn parse_grid(flag: &str, text: &str) -> Result<Vec<f64>, CliError> {
    let bad = |why: &str| CliError::Config(format!("--{flag}: {why} in `{text}`"));
    let parts: Vec<f64> = text
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad("expected numbers")))
        .collect::<Result<_, _>>()?;
    if parts.iter().any(|v| !v.is_finite()) {
        return Err(bad("non-finite value"));
    }
    match parts[..] {
        [start, end] => {
            if end < start {
                return Err(bad("end before start"));
            }
            Ok((0..=40)
                .map(|i| start + (end - start) * i as f64 / 40.0)
                .collect())
        }
        [start, end, step] => {
            if step <= 0.0 {
                return Err(bad("step must be positive"));
            }
            if end < start {
                return Err(bad("end before start"));
            }
            let span = (end - start) / step;
            let mut count = span.floor() as usize;
            if span - count as f64 > 1.0 - 1e-12 {
                count += 1;
            }
            if count > 10_000_000 {
                return Err(bad("too many grid points"));
            }
            let mut out: Vec<f64> = (0..=count).map(|i| start + step * i as f64).collect();
            // snap an on-step end point so that e.g. 0:1:0.05 ends at 1 exactly
            if let Some(last) = out.last_mut() {
                if (*last - end).abs() <= 1e-12 * end.abs().max(1.0) {
                    *last = end;
                }
            }
            Ok(out)
        }
        _ => Err(bad("expected start:end or start:end:step")),
    }
}

/// Parses `key=value,key=value` into pairs.
pub fn parse_assignments(flag: &str, text: &str) -> Result<Vec<(String, f64)>, CliError> {
    text.split(',')
        .map(|item| {
            let (k, v) = item.split_once('=').ok_or_else(|| {
                CliError::Config(format!("--{flag}: expected key=value, got `{item}`"))
            })?;
            let v = v.trim().parse::<f64>().map_err(|_| {
                CliError::Config(format!("--{flag}: `{}` is not a number", v.trim()))
            })?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}
