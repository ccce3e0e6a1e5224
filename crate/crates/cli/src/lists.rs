// SPDX-License-Identifier: Apache-2.0

//! Comma-separated list arguments.

use std::str::FromStr;

/// Parse `a,b,c`. Empty items are rejected.
pub fn parse_list<T: FromStr>(text: &str) -> Result<Vec<T>, String> {
    text.split(',')
        .map(|item| {
            let item = item.trim();
            item.parse::<T>().map_err(|_| format!("invalid list item `{item}`"))
        })
        .collect()
}

/// Seeds as a comma list whose items are single seeds or half-open
/// ranges `a..b`.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>, String> {
    let mut out = Vec::new();
    for item in text.split(',').map(str::trim) {
        match item.split_once("..") {
            Some((a, b)) => {
                let lo: u64 = a.parse().map_err(|_| format!("invalid seed range `{item}`"))?;
                let hi: u64 = b.parse().map_err(|_| format!("invalid seed range `{item}`"))?;
                if hi <= lo {
                    return Err(format!("empty seed range `{item}`"));
                }
                out.extend(lo..hi);
            }
            None => out.push(item.parse().map_err(|_| format!("invalid seed `{item}`"))?),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists() {
        assert_eq!(parse_list::<f64>("0.1, 0.2").unwrap(), vec![0.1, 0.2]);
        assert!(parse_list::<usize>("6,,8").is_err());
        assert_eq!(parse_seeds("0..3,7").unwrap(), vec![0, 1, 2, 7]);
        assert!(parse_seeds("3..3").is_err());
        assert!(parse_seeds("x").is_err());
    }
}
