//! Parsing of `--alphas` values.

use std::path::Path;

use tvoc_core::pareto::{default_alphas, log_spaced};
use tvoc_core::Weight;

/// Accepts `default`, `log:min:max:count`, a comma-separated list, or the
/// path of a file with weights separated by commas or whitespace. Lists are
/// sorted; duplicates are left for the sweep to reject.
pub fn parse(arg: &str) -> Result<Vec<Weight>, String> {
    let arg = arg.trim();
    if arg == "default" {
        return Ok(default_alphas());
    }
    if let Some(rest) = arg.strip_prefix("log:") {
        let parts: Vec<&str> = rest.split(':').collect();
        let [min, max, count] = parts.as_slice() else {
            return Err(format!("expected log:min:max:count, got {arg:?}"));
        };
        let num = |s: &str| s.trim().parse::<f64>().map_err(|e| format!("{s:?}: {e}"));
        let count: usize = count
            .trim()
            .parse()
            .map_err(|e| format!("{count:?}: {e}"))?;
        return log_spaced(num(min)?, num(max)?, count).map_err(|e| e.to_string());
    }
    let text = if Path::new(arg).is_file() {
        std::fs::read_to_string(arg).map_err(|e| format!("{arg}: {e}"))?
    } else {
        arg.to_string()
    };
    let mut weights = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<Weight>().map_err(|e| format!("{s:?}: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    if weights.is_empty() {
        return Err(format!("no weights in {arg:?}"));
    }
    weights.sort_by(|a, b| a.value().total_cmp(&b.value()));
    Ok(weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forms() {
        assert_eq!(parse("default").unwrap().len(), 202);
        let g = parse("log:1e-2:1e2:5").unwrap();
        assert_eq!(g.len(), 5);
        assert!((g[2].value() - 1.0).abs() < 1e-12);
        let l = parse("inf, 0.5,0").unwrap();
        assert!(l[0].is_zero() && l[1].value() == 0.5 && l[2].is_infinite());
        assert!(parse("log:1:2").is_err());
        assert!(parse("abc").is_err());
        assert!(parse("").is_err());
    }
}
