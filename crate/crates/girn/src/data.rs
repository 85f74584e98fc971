//! Dataset ingestion and file emission.
//!
//! Readers: big-endian IDX (images magic `0x00000803`, labels `0x00000801`)
//! and CIFAR-10 binary v1 (3073-byte records, converted to grayscale).
//! Writers: binary P5 PGM (maxval 255, rounding half up), plain CSV with a
//! header row, and the reconstruction dump format. A seeded synthetic
//! generator provides a desk-scale stand-in dataset when no corpus files are
//! available.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::eval::{EvalReport, OrbitopeHistogram};
use crate::group::{stabilizer, GroupName, GroupSpec};
use crate::image::{Grid, ImageTensor};
use crate::recon::ReconstructionState;
use crate::train::{HistoryRow, LabeledDataset};

/// A dataset with its original class labels (0..=9), before binarization.
#[derive(Debug, Clone)]
pub struct RawDataset {
    pub samples: Vec<ImageTensor>,
    pub class_labels: Vec<u8>,
}

impl RawDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Keep only the first `n` samples.
    pub fn truncate(&mut self, n: usize) {
        self.samples.truncate(n);
        self.class_labels.truncate(n);
    }
}

const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;
const IDX_LABEL_MAGIC: u32 = 0x0000_0801;

fn read_be_u32(buf: &[u8], pos: usize, kind: &'static str) -> Result<u32> {
    if pos + 4 > buf.len() {
        return Err(Error::Truncated {
            file_kind: kind,
            needed: pos + 4,
            had: buf.len(),
        });
    }
    Ok(u32::from_be_bytes(buf[pos..pos + 4].try_into().unwrap()))
}

/// Parse a pair of IDX files (big-endian) into images scaled to `[0, 1]`.
pub fn load_mnist_idx(images_path: &Path, labels_path: &Path) -> Result<RawDataset> {
    let image_bytes = fs::read(images_path)?;
    let label_bytes = fs::read(labels_path)?;

    let magic = read_be_u32(&image_bytes, 0, "IDX image file")?;
    if magic != IDX_IMAGE_MAGIC {
        return Err(Error::BadMagic {
            file_kind: "IDX image file",
            expected: IDX_IMAGE_MAGIC,
            got: magic,
        });
    }
    let count = read_be_u32(&image_bytes, 4, "IDX image file")? as usize;
    let rows = read_be_u32(&image_bytes, 8, "IDX image file")? as usize;
    let cols = read_be_u32(&image_bytes, 12, "IDX image file")? as usize;
    let needed = 16 + count * rows * cols;
    if image_bytes.len() < needed {
        return Err(Error::Truncated {
            file_kind: "IDX image file",
            needed,
            had: image_bytes.len(),
        });
    }

    let magic = read_be_u32(&label_bytes, 0, "IDX label file")?;
    if magic != IDX_LABEL_MAGIC {
        return Err(Error::BadMagic {
            file_kind: "IDX label file",
            expected: IDX_LABEL_MAGIC,
            got: magic,
        });
    }
    let label_count = read_be_u32(&label_bytes, 4, "IDX label file")? as usize;
    if label_count != count {
        return Err(Error::CountMismatch {
            images: count,
            labels: label_count,
        });
    }
    if label_bytes.len() < 8 + count {
        return Err(Error::Truncated {
            file_kind: "IDX label file",
            needed: 8 + count,
            had: label_bytes.len(),
        });
    }

    let grid = Grid::new(rows, cols);
    let mut samples = Vec::with_capacity(count);
    for i in 0..count {
        let start = 16 + i * rows * cols;
        let data = image_bytes[start..start + rows * cols]
            .iter()
            .map(|&b| b as f64 / 255.0)
            .collect();
        samples.push(ImageTensor { data, grid });
    }
    let mut class_labels = Vec::with_capacity(count);
    for i in 0..count {
        let label = label_bytes[8 + i];
        if label > 9 {
            return Err(Error::InvalidClassLabel(label));
        }
        class_labels.push(label);
    }
    Ok(RawDataset {
        samples,
        class_labels,
    })
}

const CIFAR_RECORD: usize = 3073;
const CIFAR_SIDE: usize = 32;

/// Parse a CIFAR-10 binary file, converting each 32x32 RGB record to
/// grayscale `(0.299 R + 0.587 G + 0.114 B) / 255`.
pub fn load_cifar10_bin(path: &Path) -> Result<RawDataset> {
    let bytes = fs::read(path)?;
    if bytes.is_empty() || bytes.len() % CIFAR_RECORD != 0 {
        return Err(Error::BadRecordSize { size: bytes.len() });
    }
    let count = bytes.len() / CIFAR_RECORD;
    let grid = Grid::new(CIFAR_SIDE, CIFAR_SIDE);
    let plane = CIFAR_SIDE * CIFAR_SIDE;
    let mut samples = Vec::with_capacity(count);
    let mut class_labels = Vec::with_capacity(count);
    for i in 0..count {
        let rec = &bytes[i * CIFAR_RECORD..(i + 1) * CIFAR_RECORD];
        let label = rec[0];
        if label > 9 {
            return Err(Error::InvalidClassLabel(label));
        }
        class_labels.push(label);
        let mut data = Vec::with_capacity(plane);
        for p in 0..plane {
            let r = rec[1 + p] as f64;
            let g = rec[1 + plane + p] as f64;
            let b = rec[1 + 2 * plane + p] as f64;
            data.push((0.299 * r + 0.587 * g + 0.114 * b) / 255.0);
        }
        samples.push(ImageTensor { data, grid });
    }
    Ok(RawDataset {
        samples,
        class_labels,
    })
}

/// Label binarization schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelScheme {
    /// Even digits map to `+1`, odd to `-1`.
    Parity,
    /// CIFAR-10 animals (bird, cat, deer, dog, frog, horse) map to `+1`,
    /// vehicles (airplane, automobile, ship, truck) to `-1`.
    AnimalVehicle,
}

impl LabelScheme {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "parity" => Ok(LabelScheme::Parity),
            "animal_vehicle" => Ok(LabelScheme::AnimalVehicle),
            other => Err(Error::Unsupported {
                what: "label scheme",
                detail: other.to_string(),
            }),
        }
    }

    pub fn binary_label(&self, class: u8) -> f64 {
        match self {
            LabelScheme::Parity => {
                if class % 2 == 0 {
                    1.0
                } else {
                    -1.0
                }
            }
            // CIFAR-10 class ids: 0 airplane, 1 automobile, 2 bird, 3 cat,
            // 4 deer, 5 dog, 6 frog, 7 horse, 8 ship, 9 truck
            LabelScheme::AnimalVehicle => match class {
                2..=7 => 1.0,
                _ => -1.0,
            },
        }
    }
}

/// Map raw class labels to `{+1, -1}`.
pub fn binarize_labels(raw: &RawDataset, scheme: LabelScheme) -> Result<LabeledDataset> {
    let labels = raw
        .class_labels
        .iter()
        .map(|&c| scheme.binary_label(c))
        .collect();
    LabeledDataset::new(raw.samples.clone(), labels)
}

/// Seeded synthetic dataset: smooth blob mixtures on the grid, class `+1`
/// concentrated near the center and class `-1` near the border, so the
/// classes are separable by an invariant (radial) linear functional under
/// all four groups. Bump centers are biased into a random angular sector
/// per sample, giving each image strong left-right asymmetry comparable to
/// handwritten digits. Draws with any nontrivial symmetry under the
/// dihedral group are resampled, so every sample has a full orbit.
pub fn synth_dataset(seed: u64, n: usize, grid: Grid) -> Result<LabeledDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // stabilizer checks run against the largest applicable group
    let check_group = if grid.is_square() {
        GroupSpec::new(GroupName::Dihedral4, grid)?
    } else {
        GroupSpec::new(GroupName::FlipH, grid)?
    };
    let h = grid.height as f64;
    let w = grid.width as f64;
    let r_max = 0.5 * h.min(w);
    let (mid_r, mid_c) = ((h - 1.0) / 2.0, (w - 1.0) / 2.0);

    let mut samples = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = if i % 2 == 0 { 1.0 } else { -1.0 };
        let x = loop {
            let mut data = vec![0.0; grid.len()];
            // all bumps of a sample sit in one angular quarter-sector, so
            // the sample is far from every reflection of itself (digit-like
            // asymmetry)
            let axis = rng.random::<f64>() * std::f64::consts::TAU;
            let bumps = 4 + (rng.random::<u32>() % 2) as usize;
            for _ in 0..bumps {
                let (cr, cc) = loop {
                    let cr = rng.random::<f64>() * (h - 1.0);
                    let cc = rng.random::<f64>() * (w - 1.0);
                    let (dr, dc) = (cr - mid_r, cc - mid_c);
                    let radius = (dr * dr + dc * dc).sqrt();
                    let radius_ok = if label > 0.0 {
                        (0.12 * r_max..=0.45 * r_max).contains(&radius)
                    } else {
                        (0.8 * r_max..=1.05 * r_max).contains(&radius)
                    };
                    let angle_to_axis = (dc.atan2(dr) - axis).rem_euclid(std::f64::consts::TAU);
                    let in_sector = angle_to_axis <= std::f64::consts::FRAC_PI_4
                        || angle_to_axis >= std::f64::consts::TAU - std::f64::consts::FRAC_PI_4;
                    if radius_ok && in_sector {
                        break (cr, cc);
                    }
                };
                let amp = 0.6 + 0.4 * rng.random::<f64>();
                let sigma = 0.8 + 0.4 * rng.random::<f64>();
                for r in 0..grid.height {
                    for c in 0..grid.width {
                        let d2 = (r as f64 - cr).powi(2) + (c as f64 - cc).powi(2);
                        data[grid.index(r, c)] += amp * (-d2 / (2.0 * sigma * sigma)).exp();
                    }
                }
            }
            for v in &mut data {
                *v = v.min(1.0);
            }
            let img = ImageTensor { data, grid };
            if stabilizer(&img, &check_group, 1e-9)?.len() == 1 {
                break img;
            }
        };
        samples.push(x);
        labels.push(label);
    }
    LabeledDataset::new(samples, labels)
}

/// Area-average downscaling by integer factors per axis.
pub fn downscale_image(x: &ImageTensor, target: Grid) -> Result<ImageTensor> {
    let (sh, sw) = (x.grid.height, x.grid.width);
    let (th, tw) = (target.height, target.width);
    if th == 0 || tw == 0 || sh % th != 0 {
        return Err(Error::NonIntegerRatio { src: sh, dst: th });
    }
    if sw % tw != 0 {
        return Err(Error::NonIntegerRatio { src: sw, dst: tw });
    }
    let fh = sh / th;
    let fw = sw / tw;
    let inv = 1.0 / (fh * fw) as f64;
    let mut data = Vec::with_capacity(target.len());
    for r in 0..th {
        for c in 0..tw {
            let mut acc = 0.0;
            for i in 0..fh {
                for j in 0..fw {
                    acc += x.get(r * fh + i, c * fw + j);
                }
            }
            data.push(acc * inv);
        }
    }
    Ok(ImageTensor { data, grid: target })
}

/// Downscale every sample of a dataset.
pub fn downscale(dataset: &LabeledDataset, target: Grid) -> Result<LabeledDataset> {
    let samples = dataset
        .samples
        .iter()
        .map(|x| downscale_image(x, target))
        .collect::<Result<_>>()?;
    LabeledDataset::new(samples, dataset.labels.clone())
}

// ---------------------------------------------------------------------------
// PGM emission
// ---------------------------------------------------------------------------

/// Write a binary P5 PGM (maxval 255). Values are clamped to `[0, 1]` and
/// rounded half up.
pub fn write_pgm(path: &Path, image: &ImageTensor) -> Result<()> {
    let mut out = Vec::with_capacity(image.len() + 32);
    out.extend_from_slice(
        format!("P5\n{} {}\n255\n", image.grid.width, image.grid.height).as_bytes(),
    );
    for &v in &image.data {
        out.push((v.clamp(0.0, 1.0) * 255.0).round() as u8);
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&out)?;
    Ok(())
}

/// Assemble rows of images (all the same grid) into one sheet with 1-pixel
/// mid-gray separators.
pub fn contact_sheet(rows: &[Vec<ImageTensor>]) -> Result<ImageTensor> {
    let first = rows
        .first()
        .and_then(|r| r.first())
        .ok_or(Error::EmptyDataset)?;
    let cell = first.grid;
    let ncols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let sheet_h = rows.len() * cell.height + rows.len().saturating_sub(1);
    let sheet_w = ncols * cell.width + ncols.saturating_sub(1);
    let grid = Grid::new(sheet_h, sheet_w);
    let mut data = vec![0.5; grid.len()];
    for (ri, row) in rows.iter().enumerate() {
        let r0 = ri * (cell.height + 1);
        for (ci, img) in row.iter().enumerate() {
            img.check_grid(cell)?;
            let c0 = ci * (cell.width + 1);
            for r in 0..cell.height {
                for c in 0..cell.width {
                    data[(r0 + r) * sheet_w + c0 + c] = img.get(r, c).clamp(0.0, 1.0);
                }
            }
        }
    }
    Ok(ImageTensor { data, grid })
}

// ---------------------------------------------------------------------------
// Reconstruction dump format: magic "GREC", then m, d, height, width as
// little-endian u32, then m*d candidate values and m duals as little-endian
// f64. Round-trips bit-exactly.
// ---------------------------------------------------------------------------

const RECON_MAGIC: u32 = u32::from_le_bytes(*b"GREC");

/// Serialize candidates and duals of a finished run.
pub fn save_reconstruction(path: &Path, state: &ReconstructionState) -> Result<()> {
    let m = state.candidates.len();
    let grid = state
        .candidates
        .first()
        .map(|c| c.grid)
        .ok_or(Error::EmptyDataset)?;
    let d = grid.len();
    let mut buf = Vec::with_capacity(20 + m * d * 8 + m * 8);
    buf.extend_from_slice(&RECON_MAGIC.to_le_bytes());
    buf.extend_from_slice(&(m as u32).to_le_bytes());
    buf.extend_from_slice(&(d as u32).to_le_bytes());
    buf.extend_from_slice(&(grid.height as u32).to_le_bytes());
    buf.extend_from_slice(&(grid.width as u32).to_le_bytes());
    for c in &state.candidates {
        for v in &c.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    for l in &state.lambdas {
        buf.extend_from_slice(&l.to_le_bytes());
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

/// Candidates and duals read back from a reconstruction dump.
#[derive(Debug, Clone)]
pub struct ReconstructionDump {
    pub candidates: Vec<ImageTensor>,
    pub lambdas: Vec<f64>,
}

/// Deserialize a file written by [`save_reconstruction`].
pub fn load_reconstruction(path: &Path) -> Result<ReconstructionDump> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    let kind = "reconstruction file";
    let need = |n: usize| -> Result<()> {
        if bytes.len() < n {
            Err(Error::Truncated {
                file_kind: kind,
                needed: n,
                had: bytes.len(),
            })
        } else {
            Ok(())
        }
    };
    need(20)?;
    let magic = u32::from_le_bytes(bytes[0..4].try_into().unwrap());
    if magic != RECON_MAGIC {
        return Err(Error::BadMagic {
            file_kind: kind,
            expected: RECON_MAGIC,
            got: magic,
        });
    }
    let m = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let d = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let height = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let width = u32::from_le_bytes(bytes[16..20].try_into().unwrap()) as usize;
    let grid = Grid::new(height, width);
    if grid.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: grid.len(),
        });
    }
    need(20 + m * d * 8 + m * 8)?;
    let mut pos = 20;
    let mut candidates = Vec::with_capacity(m);
    for _ in 0..m {
        let mut data = Vec::with_capacity(d);
        for _ in 0..d {
            data.push(f64::from_le_bytes(bytes[pos..pos + 8].try_into().unwrap()));
            pos += 8;
        }
        candidates.push(ImageTensor { data, grid });
    }
    let mut lambdas = Vec::with_capacity(m);
    for _ in 0..m {
        lambdas.push(f64::from_le_bytes(bytes[pos..pos + 8].try_into().unwrap()));
        pos += 8;
    }
    Ok(ReconstructionDump {
        candidates,
        lambdas,
    })
}

// ---------------------------------------------------------------------------
// CSV emission (plain comma-separated, header row, \n line endings)
// ---------------------------------------------------------------------------

/// `epoch,loss,accuracy,min_margin`
pub fn write_history_csv(path: &Path, history: &[HistoryRow]) -> Result<()> {
    let mut out = String::from("epoch,loss,accuracy,min_margin\n");
    for row in history {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.epoch, row.loss, row.accuracy, row.min_margin
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// `candidate_id,nn_index,best_g,dssim,l2`
pub fn write_matches_csv(path: &Path, report: &EvalReport, group: &GroupSpec) -> Result<()> {
    let mut out = String::from("candidate_id,nn_index,best_g,dssim,l2\n");
    for (i, m) in report.matches.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            i,
            m.nn_index,
            group.element_name(m.best_g),
            m.dssim,
            m.l2
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// One summary row per run: `method,group,n,m,mean_dssim,symmetry_score`.
#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub method: String,
    pub group: String,
    pub n: usize,
    pub m: usize,
    pub mean_dssim: f64,
    pub symmetry_score: f64,
}

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut out = String::from("method,group,n,m,mean_dssim,symmetry_score\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.method, r.group, r.n, r.m, r.mean_dssim, r.symmetry_score
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// `bin_weights,count` — weights joined by `:` so the tuple stays one field.
pub fn write_histogram_csv(path: &Path, histogram: &OrbitopeHistogram) -> Result<()> {
    let mut out = String::from("bin_weights,count\n");
    for (weights, count) in &histogram.counts {
        let key = weights
            .iter()
            .map(u32::to_string)
            .collect::<Vec<_>>()
            .join(":");
        out.push_str(&format!("{key},{count}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Sorted (weights, count) pairs parsed back from a histogram CSV body.
pub fn parse_histogram_csv(text: &str) -> Vec<(Vec<u32>, usize)> {
    let mut out: BTreeMap<Vec<u32>, usize> = BTreeMap::new();
    for line in text.lines().skip(1) {
        let Some((key, count)) = line.split_once(',') else {
            continue;
        };
        let weights: Vec<u32> = key.split(':').filter_map(|v| v.parse().ok()).collect();
        if let Ok(c) = count.parse() {
            out.insert(weights, c);
        }
    }
    out.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{orbit, GroupName};

    fn temp_path(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("girn-data-test");
        fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    /// Build IDX image/label byte blobs by hand.
    fn idx_fixture(count: usize, rows: usize, cols: usize) -> (Vec<u8>, Vec<u8>) {
        let mut img = Vec::new();
        img.extend_from_slice(&IDX_IMAGE_MAGIC.to_be_bytes());
        img.extend_from_slice(&(count as u32).to_be_bytes());
        img.extend_from_slice(&(rows as u32).to_be_bytes());
        img.extend_from_slice(&(cols as u32).to_be_bytes());
        for i in 0..count * rows * cols {
            img.push((i * 7 % 256) as u8);
        }
        let mut lab = Vec::new();
        lab.extend_from_slice(&IDX_LABEL_MAGIC.to_be_bytes());
        lab.extend_from_slice(&(count as u32).to_be_bytes());
        for i in 0..count {
            lab.push((i % 10) as u8);
        }
        (img, lab)
    }

    #[test]
    fn idx_loader_round_trips_fixture() {
        let (img, lab) = idx_fixture(3, 4, 5);
        let ip = temp_path("images.idx");
        let lp = temp_path("labels.idx");
        fs::write(&ip, &img).unwrap();
        fs::write(&lp, &lab).unwrap();
        let data = load_mnist_idx(&ip, &lp).unwrap();
        assert_eq!(data.len(), 3);
        assert_eq!(data.samples[0].grid, Grid::new(4, 5));
        assert_eq!(data.class_labels, vec![0, 1, 2]);

        // independent parser oracle: manual offset arithmetic on the bytes
        let mut checksum = 0.0;
        for p in 0..20 {
            checksum += img[16 + p] as f64 / 255.0;
        }
        let loaded: f64 = data.samples[0].data.iter().sum();
        assert!((loaded - checksum).abs() < 1e-12);

        // byte 255 scales to exactly 1.0
        let mut img255 = img.clone();
        img255[16] = 255;
        fs::write(&ip, &img255).unwrap();
        let data = load_mnist_idx(&ip, &lp).unwrap();
        assert_eq!(data.samples[0].data[0], 1.0);
    }

    #[test]
    fn idx_loader_rejects_corruption() {
        let (img, lab) = idx_fixture(2, 3, 3);
        let ip = temp_path("bad-images.idx");
        let lp = temp_path("bad-labels.idx");

        // wrong image magic
        let mut broken = img.clone();
        broken[3] = 0x01;
        fs::write(&ip, &broken).unwrap();
        fs::write(&lp, &lab).unwrap();
        assert!(matches!(
            load_mnist_idx(&ip, &lp),
            Err(Error::BadMagic { .. })
        ));

        // wrong label magic
        fs::write(&ip, &img).unwrap();
        let mut broken = lab.clone();
        broken[3] = 0x03;
        fs::write(&lp, &broken).unwrap();
        assert!(matches!(
            load_mnist_idx(&ip, &lp),
            Err(Error::BadMagic { .. })
        ));

        // truncated image payload
        fs::write(&ip, &img[..img.len() - 2]).unwrap();
        fs::write(&lp, &lab).unwrap();
        assert!(matches!(
            load_mnist_idx(&ip, &lp),
            Err(Error::Truncated { .. })
        ));

        // count mismatch between files
        let (_, lab1) = idx_fixture(1, 3, 3);
        fs::write(&ip, &img).unwrap();
        fs::write(&lp, &lab1).unwrap();
        assert!(matches!(
            load_mnist_idx(&ip, &lp),
            Err(Error::CountMismatch { .. })
        ));
    }

    fn cifar_fixture(count: usize) -> Vec<u8> {
        let mut bytes = Vec::new();
        for i in 0..count {
            bytes.push((i % 10) as u8);
            for p in 0..3072 {
                bytes.push(((i + p) * 11 % 256) as u8);
            }
        }
        bytes
    }

    #[test]
    fn cifar_loader_parses_and_grayscales() {
        let bytes = cifar_fixture(2);
        let path = temp_path("cifar.bin");
        fs::write(&path, &bytes).unwrap();
        let data = load_cifar10_bin(&path).unwrap();
        assert_eq!(data.len(), 2); // record count = filesize / 3073
        assert_eq!(data.class_labels, vec![0, 1]);

        // grayscale of a known pixel matches independent computation
        let plane = 1024;
        let (r, g, b) = (
            bytes[1] as f64,
            bytes[1 + plane] as f64,
            bytes[1 + 2 * plane] as f64,
        );
        let expected = (0.299 * r + 0.587 * g + 0.114 * b) / 255.0;
        assert!((data.samples[0].data[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn cifar_loader_rejects_bad_sizes_and_labels() {
        let path = temp_path("cifar-bad.bin");
        fs::write(&path, vec![0u8; 3072]).unwrap();
        assert!(matches!(
            load_cifar10_bin(&path),
            Err(Error::BadRecordSize { .. })
        ));
        let mut bytes = cifar_fixture(1);
        bytes[0] = 11;
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_cifar10_bin(&path),
            Err(Error::InvalidClassLabel(11))
        ));
    }

    #[test]
    fn binarization_schemes() {
        assert_eq!(LabelScheme::Parity.binary_label(4), 1.0);
        assert_eq!(LabelScheme::Parity.binary_label(7), -1.0);
        // animals +1, vehicles -1
        for animal in [2, 3, 4, 5, 6, 7] {
            assert_eq!(LabelScheme::AnimalVehicle.binary_label(animal), 1.0);
        }
        for vehicle in [0, 1, 8, 9] {
            assert_eq!(LabelScheme::AnimalVehicle.binary_label(vehicle), -1.0);
        }
    }

    #[test]
    fn synth_dataset_is_deterministic_with_full_orbits() {
        let grid = Grid::new(8, 8);
        let a = synth_dataset(42, 6, grid).unwrap();
        let b = synth_dataset(42, 6, grid).unwrap();
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert_eq!(x.data, y.data);
        }
        for name in [
            GroupName::Trivial,
            GroupName::FlipH,
            GroupName::Klein4,
            GroupName::Dihedral4,
        ] {
            let group = GroupSpec::new(name, grid).unwrap();
            for x in &a.samples {
                assert_eq!(orbit(x, &group).unwrap().len(), group.order());
            }
        }
    }

    #[test]
    fn synth_dataset_is_linearly_separable_by_trained_probe() {
        let grid = Grid::new(8, 8);
        let data = synth_dataset(7, 12, grid).unwrap();
        // train a perceptron (with bias); separable data means it reaches
        // zero mistakes in finitely many sweeps
        let d = grid.len();
        let mut w = vec![0.0; d + 1];
        let mut converged = false;
        for _ in 0..10_000 {
            let mut mistakes = 0;
            for (x, &y) in data.samples.iter().zip(&data.labels) {
                let score: f64 =
                    w[..d].iter().zip(&x.data).map(|(a, b)| a * b).sum::<f64>() + w[d];
                if y * score <= 0.0 {
                    mistakes += 1;
                    for (wv, &xv) in w[..d].iter_mut().zip(&x.data) {
                        *wv += y * xv;
                    }
                    w[d] += y;
                }
            }
            if mistakes == 0 {
                converged = true;
                break;
            }
        }
        assert!(converged, "perceptron did not separate the synthetic data");
    }

    #[test]
    fn downscale_halves_dimensions_and_preserves_constants() {
        let grid = Grid::new(4, 4);
        let constant = ImageTensor::new(vec![0.7; 16], grid).unwrap();
        let down = downscale_image(&constant, Grid::new(2, 2)).unwrap();
        assert!(down.data.iter().all(|&v| (v - 0.7).abs() < 1e-15));

        let strip = ImageTensor::from_rows(&[
            vec![0.0, 1.0, 0.0, 1.0],
            vec![1.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0, 1.0],
            vec![1.0, 1.0, 0.0, 0.0],
        ])
        .unwrap();
        let down = downscale_image(&strip, Grid::new(2, 2)).unwrap();
        assert_eq!(down.data, vec![0.5, 0.5, 0.5, 0.5]);

        assert!(downscale_image(&strip, Grid::new(3, 2)).is_err());
    }

    #[test]
    fn downscale_commutes_with_flip() {
        let src_grid = Grid::new(6, 6);
        let dst_grid = Grid::new(3, 3);
        let data = synth_dataset(3, 2, src_grid).unwrap();
        let flip_src = GroupSpec::new(GroupName::FlipH, src_grid).unwrap();
        let flip_dst = GroupSpec::new(GroupName::FlipH, dst_grid).unwrap();
        for x in &data.samples {
            let a = downscale_image(&flip_src.element(1).apply(x).unwrap(), dst_grid).unwrap();
            let b = flip_dst
                .element(1)
                .apply(&downscale_image(x, dst_grid).unwrap())
                .unwrap();
            for (u, v) in a.data.iter().zip(&b.data) {
                assert!((u - v).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn pgm_bytes_are_exact() {
        let img = ImageTensor::from_rows(&[vec![0.0, 1.0], vec![0.5, 2.0]]).unwrap();
        let path = temp_path("img.pgm");
        write_pgm(&path, &img).unwrap();
        let bytes = fs::read(&path).unwrap();
        // 0.5 * 255 = 127.5 rounds half-up to 128; 2.0 clamps to 255
        assert_eq!(bytes, b"P5\n2 2\n255\n\x00\xff\x80\xff".to_vec());
    }

    #[test]
    fn reconstruction_dump_round_trips_bit_exactly() {
        let grid = Grid::new(3, 3);
        let state = ReconstructionState::init(grid, 4, 99);
        let path = temp_path("run.grec");
        save_reconstruction(&path, &state).unwrap();
        let dump = load_reconstruction(&path).unwrap();
        assert_eq!(dump.candidates.len(), 4);
        for (a, b) in dump.candidates.iter().zip(&state.candidates) {
            for (x, y) in a.data.iter().zip(&b.data) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
        for (a, b) in dump.lambdas.iter().zip(&state.lambdas) {
            assert_eq!(a.to_bits(), b.to_bits());
        }

        // corrupted magic is rejected
        let mut bytes = fs::read(&path).unwrap();
        bytes[1] = b'X';
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_reconstruction(&path),
            Err(Error::BadMagic { .. })
        ));
    }

    #[test]
    fn histogram_csv_round_trips() {
        let mut counts = BTreeMap::new();
        counts.insert(vec![5, 5], 7usize);
        counts.insert(vec![10, 0], 2usize);
        let hist = OrbitopeHistogram {
            resolution: 10,
            counts,
        };
        let path = temp_path("hist.csv");
        write_histogram_csv(&path, &hist).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let parsed = parse_histogram_csv(&text);
        assert_eq!(parsed, vec![(vec![5, 5], 7), (vec![10, 0], 2)]);
    }
}
