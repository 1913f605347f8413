//! Run configuration: a plain-text `key = value` file.
//!
//! One setting per line; blank lines and lines starting with `#` are
//! ignored. Every key is optional and falls back to the engine default;
//! unknown or repeated keys are errors. Keys:
//!
//! | key           | meaning                                   | default |
//! |---------------|-------------------------------------------|---------|
//! | `channels`    | feature channels C                        | 16      |
//! | `k1`          | extractor residual blocks                 | 2       |
//! | `k2`          | reconstructor residual blocks             | 4       |
//! | `ablation`    | variant preset `a`..`e`                   | e       |
//! | `lr_max`      | peak learning rate                        | 4e-4    |
//! | `lr_min`      | final learning rate                       | 1e-7    |
//! | `total_steps` | optimizer steps                           | 500     |
//! | `batch_size`  | crops per step                            | 2       |
//! | `seed`        | RNG seed (init, sampling, synthetic data) | 0       |
//! | `patch`       | LR crop edge; the HR crop is 4× this      | 8       |
//! | `beta1`       | Adam first-moment decay                   | 0.9     |
//! | `beta2`       | Adam second-moment decay                  | 0.999   |
//! | `eps`         | Adam denominator floor                    | 1e-8    |
//! | `augment`     | random rotation/flip per crop             | true    |

use std::path::Path;

use stvsr_core::network::{Ablation, ModelConfig};
use stvsr_core::train::TrainConfig;

#[derive(Debug)]
pub struct Settings {
    pub model: ModelConfig,
    pub train: TrainConfig,
}

pub const VALID_KEYS: [&str; 14] = [
    "channels", "k1", "k2", "ablation", "lr_max", "lr_min", "total_steps", "batch_size", "seed",
    "patch", "beta1", "beta2", "eps", "augment",
];

/// Parse a variant preset letter.
pub fn parse_ablation(value: &str) -> Result<Ablation, String> {
    match value {
        "a" | "b" | "c" | "d" | "e" => Ok(Ablation::preset(value.chars().next().unwrap())),
        other => Err(format!("ablation must be one of a, b, c, d, e (got `{other}`)")),
    }
}

pub fn load_settings(path: &Path) -> Result<Settings, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("config {}: {e}", path.display()))?;
    parse_settings(&text).map_err(|e| format!("config {}: {e}", path.display()))
}

pub fn parse_settings(text: &str) -> Result<Settings, String> {
    let mut model = ModelConfig::default();
    let mut train = TrainConfig::default();
    let mut seen: Vec<String> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let n = idx + 1;
        let (key, value) = line
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| format!("line {n}: expected `key = value`, got `{line}`"))?;
        if !VALID_KEYS.contains(&key) {
            return Err(format!(
                "line {n}: unknown key `{key}` (valid keys: {})",
                VALID_KEYS.join(", ")
            ));
        }
        if seen.iter().any(|s| s == key) {
            return Err(format!("line {n}: key `{key}` set twice"));
        }
        seen.push(key.to_string());

        let bad = |what: &str| format!("line {n}: `{key}` must be {what}, got `{value}`");
        match key {
            "channels" => model.channels = value.parse().map_err(|_| bad("a positive integer"))?,
            "k1" => model.k1 = value.parse().map_err(|_| bad("a non-negative integer"))?,
            "k2" => model.k2 = value.parse().map_err(|_| bad("a non-negative integer"))?,
            "ablation" => model.ablation = parse_ablation(value).map_err(|e| format!("line {n}: {e}"))?,
            "lr_max" => train.lr_max = value.parse().map_err(|_| bad("a number"))?,
            "lr_min" => train.lr_min = value.parse().map_err(|_| bad("a number"))?,
            "total_steps" => train.total_steps = value.parse().map_err(|_| bad("a positive integer"))?,
            "batch_size" => train.batch_size = value.parse().map_err(|_| bad("a positive integer"))?,
            "seed" => train.seed = value.parse().map_err(|_| bad("an unsigned integer"))?,
            "patch" => train.patch = value.parse().map_err(|_| bad("a positive integer"))?,
            "beta1" => train.beta1 = value.parse().map_err(|_| bad("a number"))?,
            "beta2" => train.beta2 = value.parse().map_err(|_| bad("a number"))?,
            "eps" => train.eps = value.parse().map_err(|_| bad("a number"))?,
            "augment" => {
                train.augment = match value {
                    "true" => true,
                    "false" => false,
                    _ => return Err(bad("`true` or `false`")),
                }
            }
            _ => unreachable!("key already validated"),
        }
    }

    model.validate()?;
    if !(train.lr_min < train.lr_max) {
        return Err(format!("lr_min {} must be below lr_max {}", train.lr_min, train.lr_max));
    }
    if train.total_steps == 0 {
        return Err("total_steps must be at least 1".to_string());
    }
    if train.batch_size == 0 {
        return Err("batch_size must be at least 1".to_string());
    }
    if train.patch == 0 {
        return Err("patch must be at least 1".to_string());
    }
    Ok(Settings { model, train })
}

#[cfg(test)]
mod tests {
    use super::*;
    use stvsr_core::interp::FeatureInterp;
    use stvsr_core::network::Temporal;

    #[test]
    fn test_empty_config_gives_engine_defaults() {
        let s = parse_settings("").unwrap();
        assert_eq!(s.model.channels, 16);
        assert_eq!(s.model.k1, 2);
        assert_eq!(s.model.k2, 4);
        assert_eq!(s.train.lr_max, 4e-4);
        assert_eq!(s.train.lr_min, 1e-7);
        assert!(s.train.augment);
    }

    #[test]
    fn test_every_key_parses_and_lands_in_the_right_field() {
        let text = "\
            # model\n\
            channels = 8\n\
            k1 = 1\n\
            k2 = 3\n\
            ablation = c\n\
            \n\
            # optimizer\n\
            lr_max = 2e-3\n\
            lr_min = 1e-6\n\
            total_steps = 42\n\
            batch_size = 3\n\
            seed = 7\n\
            patch = 12\n\
            beta1 = 0.8\n\
            beta2 = 0.99\n\
            eps = 1e-9\n\
            augment = false\n";
        let s = parse_settings(text).unwrap();
        assert_eq!(s.model.channels, 8);
        assert_eq!(s.model.k1, 1);
        assert_eq!(s.model.k2, 3);
        assert_eq!(s.model.ablation.interp, FeatureInterp::Deformable);
        assert_eq!(s.model.ablation.temporal, Temporal::ConvLstm);
        assert!(!s.model.ablation.bidirectional);
        assert_eq!(s.train.lr_max, 2e-3);
        assert_eq!(s.train.lr_min, 1e-6);
        assert_eq!(s.train.total_steps, 42);
        assert_eq!(s.train.batch_size, 3);
        assert_eq!(s.train.seed, 7);
        assert_eq!(s.train.patch, 12);
        assert_eq!(s.train.beta1, 0.8);
        assert_eq!(s.train.beta2, 0.99);
        assert_eq!(s.train.eps, 1e-9);
        assert!(!s.train.augment);
    }

    #[test]
    fn test_unknown_key_is_an_error_naming_the_line() {
        let err = parse_settings("channels = 8\nlearn_rate = 0.1\n").unwrap_err();
        assert!(err.contains("line 2"), "{err}");
        assert!(err.contains("unknown key `learn_rate`"), "{err}");
    }

    #[test]
    fn test_repeated_key_is_an_error() {
        let err = parse_settings("seed = 1\nseed = 2\n").unwrap_err();
        assert!(err.contains("set twice"), "{err}");
    }

    #[test]
    fn test_malformed_line_is_an_error() {
        let err = parse_settings("channels 8\n").unwrap_err();
        assert!(err.contains("expected `key = value`"), "{err}");
    }

    #[test]
    fn test_bad_number_is_an_error() {
        let err = parse_settings("channels = eight\n").unwrap_err();
        assert!(err.contains("`channels` must be"), "{err}");
    }

    #[test]
    fn test_bad_ablation_letter_is_an_error() {
        let err = parse_settings("ablation = f\n").unwrap_err();
        assert!(err.contains("a, b, c, d, e"), "{err}");
    }

    #[test]
    fn test_inverted_learning_rates_are_an_error() {
        let err = parse_settings("lr_max = 1e-7\nlr_min = 1e-3\n").unwrap_err();
        assert!(err.contains("lr_min"), "{err}");
    }

    #[test]
    fn test_errors_are_single_line() {
        for text in ["nope = 1\n", "channels = x\n", "ablation = q\n", "seed = 1\nseed = 1\n"] {
            let err = parse_settings(text).unwrap_err();
            assert!(!err.contains('\n'), "multi-line error for {text:?}: {err}");
        }
    }
}
