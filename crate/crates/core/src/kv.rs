//! Plain-text `key = value` files.
//!
//! Blank lines and lines starting with `#` are ignored. Later keys override
//! earlier ones.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;

use crate::error::{Error, Result};

pub fn parse_map(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {}: expected `key = value`", lineno + 1)))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::Parse(format!("line {}: empty key", lineno + 1)));
        }
        map.insert(key.to_string(), value.trim().to_string());
    }
    Ok(map)
}

/// Parses a comma-separated list, tolerating surrounding whitespace.
pub fn parse_list<T>(text: &str) -> Result<Vec<T>>
where
    T: FromStr,
    T::Err: Display,
{
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|e| Error::Parse(format!("`{s}`: {e}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_with_comments_and_overrides() {
        let map = parse_map("# c\n a = 1 \n\nb=x y\na = 2\n").unwrap();
        assert_eq!(map["a"], "2");
        assert_eq!(map["b"], "x y");
    }

    #[test]
    fn rejects_lines_without_equals() {
        assert!(parse_map("novalue\n").is_err());
        assert!(parse_map(" = 3\n").is_err());
    }

    #[test]
    fn lists() {
        assert_eq!(
            parse_list::<f64>("1, -2.5,3e-1").unwrap(),
            vec![1.0, -2.5, 0.3]
        );
        assert_eq!(parse_list::<usize>("10,100,").unwrap(), vec![10, 100]);
        assert!(parse_list::<usize>("1,x").is_err());
    }
}
