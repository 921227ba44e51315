//! Prepared-dataset file: `CNNLSTM-DATA v1` in the shared text layout.

use std::path::Path;

use chrono::NaiveDate;

use super::{read_exact, PreparedData, PreprocessingState, Split};
use crate::error::{Error, Result};
use crate::textfmt::{self, TextReader, TextWriter};

pub const MAGIC: &str = "CNNLSTM-DATA";
pub const VERSION: u32 = 1;

pub fn to_text(data: &PreparedData) -> String {
    let mut w = TextWriter::new(MAGIC, VERSION);
    w.kv("lookback", data.lookback);
    w.kv("split_mode", data.split_mode.as_str());
    w.kv("rows", data.rows());
    w.kv("features", data.features());
    data.state.write(&mut w);
    w.section("data");
    let dates: Vec<String> = data.dates.iter().map(|d| d.to_string()).collect();
    w.token_block("dates", "dates", &dates);
    w.block("inputs", &[data.rows(), data.features()], &data.inputs.concat());
    w.block("close", &[data.rows()], &data.close);
    for (name, idx) in [
        ("train", &data.split.train),
        ("validation", &data.split.validation),
        ("test", &data.split.test),
    ] {
        let tokens: Vec<String> = idx.iter().map(usize::to_string).collect();
        w.token_block("indices", name, &tokens);
    }
    w.finish()
}

pub fn from_text(text: &str) -> Result<PreparedData> {
    let mut r = TextReader::new(text);
    r.expect_header(MAGIC, VERSION)?;
    let kv = r.key_values()?;
    let lookback: usize = textfmt::parse_value("lookback", textfmt::lookup(&kv, "lookback")?)?;
    let split_mode = textfmt::lookup(&kv, "split_mode")?
        .parse()
        .map_err(|e: Error| Error::Malformed { line: 0, detail: e.to_string() })?;
    let rows: usize = textfmt::parse_value("rows", textfmt::lookup(&kv, "rows")?)?;
    let features: usize = textfmt::parse_value("features", textfmt::lookup(&kv, "features")?)?;
    let state = PreprocessingState::read(&mut r)?;
    if state.features() != features {
        return Err(Error::ShapeDisagreement {
            name: "features".into(),
            expected: vec![features],
            found: vec![state.features()],
        });
    }
    r.expect_section("data")?;
    let line = r.line_no();
    let dates = r
        .token_block("dates", "dates")?
        .into_iter()
        .map(|t| {
            NaiveDate::parse_from_str(t, "%Y-%m-%d").map_err(|_| Error::Malformed {
                line,
                detail: format!("bad date `{t}`"),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if dates.len() != rows {
        return Err(Error::ShapeDisagreement {
            name: "dates".into(),
            expected: vec![rows],
            found: vec![dates.len()],
        });
    }
    let inputs = read_exact(&mut r, "inputs", &[rows, features])?
        .chunks(features.max(1))
        .map(<[f64]>::to_vec)
        .collect();
    let close = read_exact(&mut r, "close", &[rows])?;
    let n = super::window::sample_count(rows, lookback, state.horizon)
        .map_err(|e| Error::Malformed { line: 0, detail: e.to_string() })?;
    let mut sets = Vec::new();
    for name in ["train", "validation", "test"] {
        let line = r.line_no();
        let idx = r
            .token_block("indices", name)?
            .into_iter()
            .map(|t| match t.parse::<usize>() {
                Ok(i) if i < n => Ok(i),
                _ => Err(Error::Malformed {
                    line,
                    detail: format!("bad sample index `{t}` in {name}"),
                }),
            })
            .collect::<Result<Vec<_>>>()?;
        sets.push(idx);
    }
    if !r.at_end() {
        return Err(Error::Malformed {
            line: r.line_no(),
            detail: "unexpected trailing content".into(),
        });
    }
    let test = sets.pop().unwrap_or_default();
    let validation = sets.pop().unwrap_or_default();
    let train = sets.pop().unwrap_or_default();
    Ok(PreparedData {
        dates,
        inputs,
        close,
        lookback,
        split_mode,
        split: Split { train, validation, test },
        state,
    })
}

pub fn save(data: &PreparedData, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_text(data)).map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<PreparedData> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_text(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{prepare, PipelineConfig};
    use crate::synth::{noisy_sine, SynthConfig};

    fn prepared(pca: bool) -> PreparedData {
        let series = noisy_sine(&SynthConfig { rows: 220, ..SynthConfig::default() }).unwrap();
        let cfg = PipelineConfig {
            lookback: 6,
            sma_windows: vec![5, 20],
            pca,
            ..PipelineConfig::default()
        };
        prepare(&series, &cfg).unwrap().0
    }

    #[test]
    fn round_trip_exact() {
        for pca in [true, false] {
            let data = prepared(pca);
            let text = to_text(&data);
            let back = from_text(&text).unwrap();
            assert_eq!(back, data);
            assert_eq!(to_text(&back), text);
        }
    }

    #[test]
    fn version_and_truncation() {
        let text = to_text(&prepared(true));
        let bumped = text.replacen("CNNLSTM-DATA v1", "CNNLSTM-DATA v9", 1);
        let err = from_text(&bumped).unwrap_err();
        assert!(matches!(err, Error::Version { .. }));
        assert_eq!(err.exit_code(), 4);
        let cut = &text[..text.len() / 2];
        assert!(matches!(from_text(cut), Err(Error::Malformed { .. })));
    }
}
