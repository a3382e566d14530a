//! Schema files: one `name<TAB>kind<TAB>max_bins` line per feature.

use std::fmt::Write as _;
use std::path::Path;

use debias_core::{FeatureKind, FeatureSchema, FeatureSpec};

use crate::error::{CliError, Result};

pub fn parse_schema(text: &str, path: &Path) -> Result<FeatureSchema> {
    let mut specs = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [name, kind, bins] = fields[..] else {
            return Err(CliError::parse(path, n + 1, "expected name<TAB>kind<TAB>max_bins"));
        };
        let kind = FeatureKind::parse(kind).map_err(|e| CliError::parse(path, n + 1, e.to_string()))?;
        let max_bins = bins
            .parse()
            .map_err(|_| CliError::parse(path, n + 1, format!("bad max_bins `{bins}`")))?;
        specs.push(FeatureSpec::new(name, kind, max_bins));
    }
    Ok(FeatureSchema::new(specs)?)
}

pub fn read_schema(path: &Path) -> Result<FeatureSchema> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    parse_schema(&text, path)
}

pub fn format_schema(schema: &FeatureSchema) -> String {
    let mut out = String::new();
    for spec in schema.specs() {
        writeln!(out, "{}\t{}\t{}", spec.name, spec.kind, spec.max_bins).unwrap();
    }
    out
}

pub fn write_schema(path: &Path, schema: &FeatureSchema) -> Result<()> {
    std::fs::write(path, format_schema(schema)).map_err(CliError::io(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_formats() {
        let text = "rank\trank\t1\nprice\theavy_tailed\t32\n\n# comment\nshare\tproportion\t21\n";
        let schema = parse_schema(text, Path::new("s.tsv")).unwrap();
        assert_eq!(schema.len(), 3);
        assert_eq!(schema.rank_index(), 0);
        assert_eq!(format_schema(&schema), "rank\trank\t1\nprice\theavy_tailed\t32\nshare\tproportion\t21\n");
    }

    #[test]
    fn rejects_bad_lines() {
        let err = parse_schema("rank\trank\t1\nprice heavy_tailed 32\n", Path::new("s.tsv")).unwrap_err();
        assert!(err.to_string().contains("s.tsv:2"));
        assert!(parse_schema("rank\trank\t1\nx\tlinear\t3\n", Path::new("s")).is_err());
        assert!(parse_schema("x\tproportion\t21\n", Path::new("s")).is_err());
    }
}
