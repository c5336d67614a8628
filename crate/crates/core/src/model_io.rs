//! Plain-text model files.
//!
//! ```text
//! gfmm-model 1
//! n_dims 2
//! gamma 1 1
//! class 1 setosa
//! class 2 versicolor
//! norm_min 4.3 2
//! norm_max 7.9 4.4
//! boxes 2
//! 1 0.1 0.2 0.3 0.4
//! 2 0.5 0.5 0.9 0.7
//! ```
//!
//! Each box line is the label, then the `n_dims` min coordinates, then the
//! `n_dims` max coordinates. Floats are written in shortest round-trip form
//! so loading restores them bit for bit. `class` and `norm_*` lines are
//! optional.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::dataset::Normalizer;
use crate::error::{GfmmError, Result};
use crate::hyperbox::{ClassId, GfmmModel, Hyperbox};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "gfmm-model";

/// A model with the metadata needed to apply it to raw data.
#[derive(Debug, Clone, PartialEq)]
pub struct SavedModel {
    pub model: GfmmModel,
    /// `class_names[i]` names class id `i + 1`.
    pub class_names: Vec<String>,
    pub normalizer: Option<Normalizer>,
}

impl SavedModel {
    pub fn bare(model: GfmmModel) -> Self {
        Self { model, class_names: Vec::new(), normalizer: None }
    }

    pub fn class_name(&self, id: ClassId) -> String {
        match id {
            0 => String::new(),
            _ => self.class_names.get(id as usize - 1).cloned().unwrap_or_else(|| id.to_string()),
        }
    }
}

pub fn write_model(saved: &SavedModel, mut w: impl Write) -> Result<()> {
    let m = &saved.model;
    writeln!(w, "{MAGIC} {FORMAT_VERSION}")?;
    writeln!(w, "n_dims {}", m.n_dims())?;
    writeln!(w, "gamma {}", join(m.gamma()))?;
    for (i, name) in saved.class_names.iter().enumerate() {
        writeln!(w, "class {} {}", i + 1, name)?;
    }
    if let Some(norm) = &saved.normalizer {
        writeln!(w, "norm_min {}", join(&norm.min))?;
        writeln!(w, "norm_max {}", join(&norm.max))?;
    }
    writeln!(w, "boxes {}", m.len())?;
    for b in m.boxes() {
        writeln!(w, "{} {} {}", b.label, join(&b.min), join(&b.max))?;
    }
    Ok(())
}

pub fn save_model(saved: &SavedModel, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_model(saved, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<SavedModel> {
    let file = std::fs::File::open(path.as_ref())
        .map_err(|e| GfmmError::Io(format!("{}: {e}", path.as_ref().display())))?;
    read_model(std::io::BufReader::new(file))
}

pub fn read_model(r: impl BufRead) -> Result<SavedModel> {
    let mut lines = r.lines().enumerate().map(|(i, l)| l.map(|l| (i + 1, l)));
    let mut next = |what: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some(l) => Ok(l?),
            None => Err(GfmmError::Parse(format!("model file truncated: expected {what}"))),
        }
    };

    let (_, head) = next("header")?;
    let mut it = head.split_whitespace();
    if it.next() != Some(MAGIC) {
        return Err(GfmmError::Parse("not a gfmm model file".into()));
    }
    let version = it.next().unwrap_or("");
    if version != FORMAT_VERSION.to_string() {
        return Err(GfmmError::VersionMismatch { expected: FORMAT_VERSION, found: version.to_string() });
    }

    let (ln, line) = next("n_dims")?;
    let n_dims: usize = keyed(&line, "n_dims", ln)?
        .parse()
        .map_err(|_| bad(ln, "n_dims must be an integer"))?;
    let (ln, line) = next("gamma")?;
    let gamma = floats(keyed(&line, "gamma", ln)?, ln)?;

    let mut class_names = Vec::new();
    let mut norm_min = None;
    let mut norm_max = None;
    let n_boxes = loop {
        let (ln, line) = next("boxes")?;
        let (key, rest) = line.split_once(' ').unwrap_or((line.as_str(), ""));
        match key {
            "class" => {
                let (id, name) = rest.split_once(' ').unwrap_or((rest, ""));
                if id.parse::<usize>().ok() != Some(class_names.len() + 1) {
                    return Err(bad(ln, "class ids must run 1, 2, ... in order"));
                }
                class_names.push(name.to_string());
            }
            "norm_min" => norm_min = Some(floats(rest, ln)?),
            "norm_max" => norm_max = Some(floats(rest, ln)?),
            "boxes" => break rest.trim().parse::<usize>().map_err(|_| bad(ln, "box count must be an integer"))?,
            _ => return Err(bad(ln, &format!("unexpected key {key:?}"))),
        }
    };

    let normalizer = match (norm_min, norm_max) {
        (Some(min), Some(max)) if min.len() == n_dims && max.len() == n_dims => Some(Normalizer { min, max }),
        (None, None) => None,
        _ => return Err(GfmmError::Parse("norm_min/norm_max must both be present with n_dims values".into())),
    };

    let mut boxes = Vec::with_capacity(n_boxes);
    for _ in 0..n_boxes {
        let (ln, line) = next("box record")?;
        let mut fields = line.split_whitespace();
        let label: ClassId = fields
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| bad(ln, "box label must be an integer"))?;
        let coords = floats(&fields.collect::<Vec<_>>().join(" "), ln)?;
        if coords.len() != 2 * n_dims {
            return Err(bad(ln, &format!("expected {} coordinates, found {}", 2 * n_dims, coords.len())));
        }
        let (min, max) = coords.split_at(n_dims);
        boxes.push(Hyperbox { min: min.to_vec(), max: max.to_vec(), label });
    }
    Ok(SavedModel {
        model: GfmmModel::from_boxes(n_dims, gamma, boxes)?,
        class_names,
        normalizer,
    })
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(f64::to_string).collect::<Vec<_>>().join(" ")
}

fn keyed<'a>(line: &'a str, key: &str, ln: usize) -> Result<&'a str> {
    line.strip_prefix(key)
        .and_then(|r| r.strip_prefix(' '))
        .ok_or_else(|| bad(ln, &format!("expected {key}")))
}

fn floats(text: &str, ln: usize) -> Result<Vec<f64>> {
    text.split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| bad(ln, &format!("not a number: {t:?}"))))
        .collect()
}

fn bad(ln: usize, msg: &str) -> GfmmError {
    GfmmError::Parse(format!("model file line {ln}: {msg}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn roundtrip(saved: &SavedModel) -> SavedModel {
        let mut buf = Vec::new();
        write_model(saved, &mut buf).unwrap();
        read_model(buf.as_slice()).unwrap()
    }

    fn sample() -> SavedModel {
        let boxes = vec![
            Hyperbox { min: vec![0.1, 0.2], max: vec![0.3, 0.4], label: 1 },
            Hyperbox { min: vec![1.0 / 3.0, 0.0], max: vec![0.9, 1.0], label: 0 },
        ];
        SavedModel {
            model: GfmmModel::from_boxes(2, vec![1.0, 2.5], boxes).unwrap(),
            class_names: vec!["Iris setosa".into(), "b".into()],
            normalizer: Some(Normalizer { min: vec![4.3, 2.0], max: vec![7.9, 4.4] }),
        }
    }

    #[test]
    fn save_load_equality() {
        let s = sample();
        assert_eq!(roundtrip(&s), s);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.txt");
        save_model(&s, &path).unwrap();
        assert_eq!(load_model(&path).unwrap(), s);
    }

    #[test]
    fn empty_model_is_header_only() {
        let s = SavedModel::bare(GfmmModel::new(3, vec![1.0; 3]).unwrap());
        let mut buf = Vec::new();
        write_model(&s, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.ends_with("boxes 0\n"));
        assert_eq!(roundtrip(&s), s);
    }

    #[test]
    fn wrong_version_and_truncation_fail() {
        let mut buf = Vec::new();
        write_model(&sample(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let v2 = text.replacen("gfmm-model 1", "gfmm-model 2", 1);
        assert!(matches!(read_model(v2.as_bytes()), Err(GfmmError::VersionMismatch { .. })));
        let lines: Vec<&str> = text.lines().collect();
        let cut = lines[..lines.len() - 1].join("\n");
        assert!(read_model(cut.as_bytes()).unwrap_err().to_string().contains("truncated"));
        let short = text.replace("0.1 0.2 0.3 0.4", "0.1 0.2 0.3");
        assert!(read_model(short.as_bytes()).is_err());
        assert!(read_model("hello\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn coordinates_round_trip_bit_exact(
            coords in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0, 0u32..4), 1..20),
        ) {
            let boxes = coords.iter().map(|&(a, b, l)| Hyperbox {
                min: vec![a.min(b), a],
                max: vec![a.max(b), b],
                label: l,
            }).collect();
            let s = SavedModel::bare(GfmmModel::from_boxes(2, vec![1.0, 1.0], boxes).unwrap());
            let back = roundtrip(&s);
            for (x, y) in s.model.boxes().iter().zip(back.model.boxes()) {
                for (p, q) in x.min.iter().chain(&x.max).zip(y.min.iter().chain(&y.max)) {
                    prop_assert_eq!(p.to_bits(), q.to_bits());
                }
            }
        }
    }
}
