//! Line-oriented text container shared by checkpoints and dataset caches.
//!
//! ```text
//! <MAGIC> v<version>
//! key=value
//! [section]
//! key=value
//! param <name> <d0>[,<d1>[,<d2>]]
//! <values, whitespace separated, any number per line>
//! ```
//!
//! Floats are written with 17 significant digits so every `f64` survives a
//! write/read cycle bit-for-bit.

use std::fmt::Write as _;

use crate::error::{Error, Result};

pub const VALUES_PER_LINE: usize = 8;

pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn join_f64(values: &[f64]) -> String {
    values.iter().map(|v| format_f64(*v)).collect::<Vec<_>>().join(",")
}

#[derive(Default)]
pub struct TextWriter {
    buf: String,
}

impl TextWriter {
    pub fn new(magic: &str, version: u32) -> Self {
        let mut w = TextWriter::default();
        let _ = writeln!(w.buf, "{magic} v{version}");
        w
    }

    pub fn kv(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.buf, "{key}={value}");
    }

    pub fn section(&mut self, name: &str) {
        let _ = writeln!(self.buf, "[{name}]");
    }

    fn values<T: AsRef<str>>(&mut self, tokens: impl IntoIterator<Item = T>) {
        let mut on_line = 0;
        for tok in tokens {
            if on_line > 0 {
                self.buf.push(' ');
            }
            self.buf.push_str(tok.as_ref());
            on_line += 1;
            if on_line == VALUES_PER_LINE {
                self.buf.push('\n');
                on_line = 0;
            }
        }
        if on_line > 0 {
            self.buf.push('\n');
        }
    }

    pub fn block(&mut self, name: &str, shape: &[usize], values: &[f64]) {
        let dims: Vec<String> = shape.iter().map(usize::to_string).collect();
        let _ = writeln!(self.buf, "param {name} {}", dims.join(","));
        self.values(values.iter().map(|v| format_f64(*v)));
    }

    /// A block of arbitrary whitespace-free tokens (dates, indices).
    pub fn token_block(&mut self, keyword: &str, name: &str, tokens: &[String]) {
        let _ = writeln!(self.buf, "{keyword} {name} {}", tokens.len());
        self.values(tokens);
    }

    pub fn finish(self) -> String {
        self.buf
    }
}

pub struct TextReader<'a> {
    lines: Vec<&'a str>,
    pos: usize,
}

/// One parsed `param` block.
#[derive(Debug, Clone)]
pub struct Block {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl<'a> TextReader<'a> {
    pub fn new(text: &'a str) -> Self {
        TextReader {
            lines: text.lines().collect(),
            pos: 0,
        }
    }

    /// 1-based number of the line about to be read.
    pub fn line_no(&self) -> usize {
        self.pos + 1
    }

    fn malformed(&self, detail: impl Into<String>) -> Error {
        Error::Malformed {
            line: self.line_no(),
            detail: detail.into(),
        }
    }

    pub fn at_end(&self) -> bool {
        self.pos >= self.lines.len()
    }

    pub fn peek(&self) -> Option<&'a str> {
        self.lines.get(self.pos).copied()
    }

    fn next_line(&mut self) -> Result<&'a str> {
        let line = self
            .peek()
            .ok_or_else(|| self.malformed("unexpected end of file"))?;
        self.pos += 1;
        Ok(line)
    }

    pub fn expect_header(&mut self, magic: &str, version: u32) -> Result<()> {
        let expected = format!("{magic} v{version}");
        let line = self.next_line()?.trim_end();
        if line == expected {
            return Ok(());
        }
        if line.starts_with(magic) {
            return Err(Error::Version {
                expected,
                found: line.to_string(),
            });
        }
        self.pos -= 1;
        Err(self.malformed(format!("expected header `{expected}`, found `{line}`")))
    }

    /// Reads `key=value` lines until a section header, a block, or EOF.
    pub fn key_values(&mut self) -> Result<Vec<(String, String)>> {
        let mut out = Vec::new();
        while let Some(line) = self.peek() {
            let line = line.trim();
            if line.starts_with('[') || line.starts_with("param ") || line.starts_with("dates ")
                || line.starts_with("indices ")
            {
                break;
            }
            if line.is_empty() {
                self.pos += 1;
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| self.malformed(format!("expected key=value, found `{line}`")))?;
            out.push((k.trim().to_string(), v.trim().to_string()));
            self.pos += 1;
        }
        Ok(out)
    }

    pub fn expect_section(&mut self, name: &str) -> Result<()> {
        let line = self.next_line()?.trim();
        if line == format!("[{name}]") {
            Ok(())
        } else {
            self.pos -= 1;
            Err(self.malformed(format!("expected section [{name}], found `{line}`")))
        }
    }

    fn tokens(&mut self, count: usize) -> Result<Vec<&'a str>> {
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let line = self
                .next_line()
                .map_err(|_| self.malformed(format!("block truncated: {} of {count} values", out.len())))?;
            let before = out.len();
            out.extend(line.split_whitespace());
            if out.len() > count || out.len() == before {
                self.pos -= 1;
                return Err(self.malformed(format!(
                    "block has wrong value count: expected {count}"
                )));
            }
        }
        Ok(out)
    }

    pub fn block(&mut self) -> Result<Block> {
        let line = self.next_line()?.trim();
        let mut parts = line.split_whitespace();
        if parts.next() != Some("param") {
            self.pos -= 1;
            return Err(self.malformed(format!("expected `param` block, found `{line}`")));
        }
        let (name, dims) = match (parts.next(), parts.next(), parts.next()) {
            (Some(n), Some(d), None) => (n.to_string(), d),
            _ => {
                self.pos -= 1;
                return Err(self.malformed(format!("bad block header `{line}`")));
            }
        };
        let shape = dims
            .split(',')
            .map(|d| d.parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| self.malformed(format!("bad shape `{dims}`")))?;
        let count: usize = shape.iter().product();
        let values = self
            .tokens(count)?
            .into_iter()
            .map(|t| {
                t.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| self.malformed(format!("bad number `{t}` in `{name}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Block {
            name,
            shape,
            values,
        })
    }

    /// Reads a block and checks its name.
    pub fn named_block(&mut self, name: &str) -> Result<Block> {
        let at = self.line_no();
        let b = self.block()?;
        if b.name != name {
            return Err(Error::Malformed {
                line: at,
                detail: format!("expected block `{name}`, found `{}`", b.name),
            });
        }
        Ok(b)
    }

    pub fn token_block(&mut self, keyword: &str, name: &str) -> Result<Vec<&'a str>> {
        let line = self.next_line()?.trim();
        let parts: Vec<&str> = line.split_whitespace().collect();
        let count = match parts.as_slice() {
            [k, n, c] if *k == keyword && *n == name => c.parse::<usize>().ok(),
            _ => None,
        };
        match count {
            Some(c) => self.tokens(c),
            None => {
                self.pos -= 1;
                Err(self.malformed(format!("expected `{keyword} {name} <count>`, found `{line}`")))
            }
        }
    }
}

/// Looks up a required key in parsed `key=value` pairs.
pub fn lookup<'a>(pairs: &'a [(String, String)], key: &str) -> Result<&'a str> {
    pairs
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
        .ok_or_else(|| Error::Malformed {
            line: 0,
            detail: format!("missing key `{key}`"),
        })
}

pub fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Malformed {
        line: 0,
        detail: format!("bad value `{value}` for `{key}`"),
    })
}

pub fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| parse_value(key, v.trim())).collect()
}
