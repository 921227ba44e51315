//! Model parameters plus frozen preprocessing state: `CNNLSTM-CKPT v1`.

use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{Model, ModelConfig, Parameters, STAGES};
use crate::pipeline::{join_usize, PreprocessingState};
use crate::textfmt::{self, TextReader, TextWriter};

pub const MAGIC: &str = "CNNLSTM-CKPT";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub state: PreprocessingState,
}

fn malformed(detail: String) -> Error {
    Error::Malformed { line: 0, detail }
}

fn stage_list(key: &str, value: &str) -> Result<[usize; STAGES]> {
    let v: Vec<usize> = textfmt::parse_list(key, value)?;
    v.try_into()
        .map_err(|v: Vec<usize>| malformed(format!("`{key}` needs {STAGES} values, found {}", v.len())))
}

impl Checkpoint {
    pub fn new(model: Model, state: PreprocessingState) -> Result<Self> {
        if model.config().features != state.features() {
            return Err(Error::Incompatible(format!(
                "model has {} input features, preprocessing yields {}",
                model.config().features,
                state.features()
            )));
        }
        Ok(Checkpoint { model, state })
    }

    pub fn to_text(&self) -> String {
        let c = self.model.config();
        let mut w = TextWriter::new(MAGIC, VERSION);
        w.kv("lookback", c.lookback);
        w.kv("features", c.features);
        w.kv("conv_filters", join_usize(&c.conv_filters));
        w.kv("kernel_width", c.kernel_width);
        w.kv("pool_window", c.pool_window);
        w.kv("lstm_units", join_usize(&c.lstm_units));
        w.kv("dropout_rate", textfmt::format_f64(c.dropout_rate));
        w.kv("seed", c.seed);
        self.state.write(&mut w);
        w.section("parameters");
        for p in self.model.params().named() {
            w.block(&p.name, p.tensor.shape(), p.tensor.data());
        }
        w.finish()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut r = TextReader::new(text);
        r.expect_header(MAGIC, VERSION)?;
        let kv = r.key_values()?;
        let get = |k: &str| textfmt::lookup(&kv, k);
        let config = ModelConfig {
            lookback: textfmt::parse_value("lookback", get("lookback")?)?,
            features: textfmt::parse_value("features", get("features")?)?,
            conv_filters: stage_list("conv_filters", get("conv_filters")?)?,
            kernel_width: textfmt::parse_value("kernel_width", get("kernel_width")?)?,
            pool_window: textfmt::parse_value("pool_window", get("pool_window")?)?,
            lstm_units: stage_list("lstm_units", get("lstm_units")?)?,
            dropout_rate: textfmt::parse_value("dropout_rate", get("dropout_rate")?)?,
            seed: textfmt::parse_value("seed", get("seed")?)?,
        };
        config
            .stage_lengths()
            .map_err(|e| malformed(format!("invalid model configuration: {e}")))?;
        let state = PreprocessingState::read(&mut r)?;
        r.expect_section("parameters")?;
        let mut params = Parameters::zeros(&config);
        for p in params.named_mut() {
            let at = r.line_no();
            let block = r.block()?;
            if block.name != p.name {
                return Err(Error::Malformed {
                    line: at,
                    detail: format!("expected parameter `{}`, found `{}`", p.name, block.name),
                });
            }
            if block.shape != p.tensor.shape() {
                return Err(Error::ShapeDisagreement {
                    name: p.name,
                    expected: p.tensor.shape().to_vec(),
                    found: block.shape,
                });
            }
            p.tensor.data_mut().copy_from_slice(&block.values);
        }
        if !r.at_end() {
            return Err(Error::Malformed {
                line: r.line_no(),
                detail: "unexpected trailing content".into(),
            });
        }
        Checkpoint::new(Model::from_parts(config, params)?, state)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::from_text(&text)
    }
}
