//! Parsing of block specifications and kernel assignments from flags.
//!
//! Grammar:
//!
//! ```text
//! block spec    := NAME '=' SOURCE
//! SOURCE        := col (',' col)*        numeric columns -> vector block
//!                | 'cat(' col ')'        categorical column -> one-hot block
//!                | 'dist(' path ')'      grouped-samples file -> distributions
//! kernel assign := NAME '=' FAMILY [':' PARAM]
//! FAMILY        := linear | gaussian | laplacian | bspline | energy
//! ```

use std::path::PathBuf;

use prototypal::KernelSpec;

use crate::error::{CliError, Result};

/// Where a feature block's raw data comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum BlockSource {
    /// Numeric columns of the tabular file.
    Columns(Vec<String>),
    /// A categorical column of the tabular file, one-hot encoded.
    Categorical(String),
    /// A long-format grouped-samples file.
    Grouped(PathBuf),
}

/// A named feature block declaration.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSpec {
    pub name: String,
    pub source: BlockSource,
}

pub fn parse_block_spec(s: &str) -> Result<BlockSpec> {
    let (name, source) = s
        .split_once('=')
        .ok_or_else(|| CliError::config(format!("block spec '{s}' must look like name=source")))?;
    let name = name.trim();
    if name.is_empty() {
        return Err(CliError::config(format!(
            "block spec '{s}' has an empty name"
        )));
    }
    let source = source.trim();
    let source = if let Some(inner) = strip_call(source, "cat") {
        BlockSource::Categorical(inner.to_string())
    } else if let Some(inner) = strip_call(source, "dist") {
        BlockSource::Grouped(PathBuf::from(inner))
    } else {
        let cols: Vec<String> = source
            .split(',')
            .map(|c| c.trim().to_string())
            .filter(|c| !c.is_empty())
            .collect();
        if cols.is_empty() {
            return Err(CliError::config(format!(
                "block spec '{s}' lists no columns"
            )));
        }
        BlockSource::Columns(cols)
    };
    Ok(BlockSpec {
        name: name.to_string(),
        source,
    })
}

fn strip_call<'a>(s: &'a str, func: &str) -> Option<&'a str> {
    let rest = s.strip_prefix(func)?.trim_start();
    let inner = rest.strip_prefix('(')?.strip_suffix(')')?;
    let inner = inner.trim();
    if inner.is_empty() {
        None
    } else {
        Some(inner)
    }
}

/// Parses `family[:param]` into a kernel spec.
pub fn parse_kernel(s: &str) -> Result<KernelSpec> {
    let (family, param) = match s.split_once(':') {
        Some((f, p)) => (f.trim(), Some(p.trim())),
        None => (s.trim(), None),
    };
    let need_param = |what: &str| -> Result<f64> {
        param
            .ok_or_else(|| CliError::config(format!("kernel '{s}' needs a {what} parameter")))?
            .parse::<f64>()
            .map_err(|_| CliError::config(format!("kernel '{s}': cannot parse parameter")))
    };
    let spec = match family {
        "linear" => KernelSpec::Linear,
        "energy" => KernelSpec::Energy,
        "gaussian" => KernelSpec::Gaussian {
            sigma: need_param("bandwidth")?,
        },
        "laplacian" => KernelSpec::Laplacian {
            sigma: need_param("bandwidth")?,
        },
        "bspline" => KernelSpec::BSpline {
            degree: need_param("degree")? as u32,
        },
        other => {
            return Err(CliError::config(format!(
                "unknown kernel family '{other}' (expected linear, gaussian, laplacian, bspline or energy)"
            )))
        }
    };
    spec.validate()
        .map_err(|e| CliError::config(e.to_string()))?;
    Ok(spec)
}

/// Parses `block=family[:param]`.
pub fn parse_kernel_assignment(s: &str) -> Result<(String, KernelSpec)> {
    let (name, spec) = s.split_once('=').ok_or_else(|| {
        CliError::config(format!(
            "kernel assignment '{s}' must look like block=family[:param]"
        ))
    })?;
    Ok((name.trim().to_string(), parse_kernel(spec)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vector_spec() {
        let spec = parse_block_spec("sepal=sepal_length,sepal_width").unwrap();
        assert_eq!(spec.name, "sepal");
        assert_eq!(
            spec.source,
            BlockSource::Columns(vec!["sepal_length".into(), "sepal_width".into()])
        );
    }

    #[test]
    fn categorical_spec() {
        let spec = parse_block_spec("label=cat(species)").unwrap();
        assert_eq!(spec.source, BlockSource::Categorical("species".into()));
    }

    #[test]
    fn grouped_spec() {
        let spec = parse_block_spec("acc=dist(data/acc.csv)").unwrap();
        assert_eq!(
            spec.source,
            BlockSource::Grouped(PathBuf::from("data/acc.csv"))
        );
    }

    #[test]
    fn bad_specs_are_config_errors() {
        assert!(parse_block_spec("nameonly").is_err());
        assert!(parse_block_spec("=cols").is_err());
        assert!(parse_block_spec("x=").is_err());
    }

    #[test]
    fn kernel_parsing() {
        assert_eq!(parse_kernel("linear").unwrap(), KernelSpec::Linear);
        assert_eq!(
            parse_kernel("gaussian:0.5").unwrap(),
            KernelSpec::Gaussian { sigma: 0.5 }
        );
        assert_eq!(
            parse_kernel("bspline:3").unwrap(),
            KernelSpec::BSpline { degree: 3 }
        );
        assert!(parse_kernel("gaussian").is_err());
        assert!(parse_kernel("rbf:1").is_err());
        assert!(parse_kernel("gaussian:-2").is_err());
    }
}
