//! Versioned binary container for trained models: a flat list of named
//! sections, every matrix stored with its shape in row-major little-endian
//! f64, integers as little-endian u64/i64, names length-prefixed. Encoding
//! is deterministic, so save -> load -> save is byte-identical.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::autoencoder::{CdmmaLayer, CdmmaModel, WideCdmmaModel};
use crate::classifier::ClassifierModel;
use crate::error::{Error, Result};
use crate::membership::MembershipMappingModel;
use crate::numkit::KernelParams;
use crate::transfer::{Source2TargetModel, TransferModel};

pub const ARCHIVE_VERSION: u64 = 1;
const MAGIC: &[u8; 8] = b"MMARCHV1";

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub name: String,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelArchive {
    pub format_version: u64,
    pub sections: Vec<Section>,
}

impl Default for ModelArchive {
    fn default() -> Self {
        Self::new()
    }
}

impl ModelArchive {
    pub fn new() -> Self {
        ModelArchive {
            format_version: ARCHIVE_VERSION,
            sections: Vec::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.sections.push(Section {
            name: name.into(),
            bytes,
        });
    }

    pub fn find(&self, name: &str) -> Option<&[u8]> {
        self.sections
            .iter()
            .find(|s| s.name == name)
            .map(|s| s.bytes.as_slice())
    }

    fn require(&self, name: &str) -> Result<&[u8]> {
        self.find(name)
            .ok_or_else(|| Error::format(format!("archive is missing section {name:?}")))
    }

    pub fn section_names(&self) -> impl Iterator<Item = &str> {
        self.sections.iter().map(|s| s.name.as_str())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.buf.extend_from_slice(MAGIC);
        w.put_u64(self.format_version);
        w.put_u64(self.sections.len() as u64);
        for s in &self.sections {
            w.put_string(&s.name);
            w.put_u64(s.bytes.len() as u64);
            w.buf.extend_from_slice(&s.bytes);
        }
        w.buf
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        let mut r = Reader::new(data);
        let magic = r.take(8)?;
        if magic != MAGIC {
            return Err(Error::format(format!(
                "bad archive magic at offset 0: {:02x?}",
                &magic[..magic.len().min(8)]
            )));
        }
        let format_version = r.u64()?;
        if format_version != ARCHIVE_VERSION {
            return Err(Error::Version {
                found: format_version,
                supported: ARCHIVE_VERSION,
            });
        }
        let count = r.u64()? as usize;
        let mut sections = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let name = r.string()?;
            let len = r.u64()? as usize;
            let bytes = r.take(len)?.to_vec();
            sections.push(Section { name, bytes });
        }
        r.finish()?;
        Ok(ModelArchive {
            format_version,
            sections,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let data = fs::read(path)?;
        Self::from_bytes(&data)
    }
}

/// The "kind" section distinguishes classifier archives from transfer
/// archives.
pub fn archive_kind(archive: &ModelArchive) -> Result<String> {
    let bytes = archive.require("kind")?;
    String::from_utf8(bytes.to_vec()).map_err(|_| Error::format("archive kind is not valid UTF-8"))
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn new() -> Self {
        Writer { buf: Vec::new() }
    }

    fn put_u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn put_i64(&mut self, v: i64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn put_f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn put_string(&mut self, s: &str) {
        self.put_u64(s.len() as u64);
        self.buf.extend_from_slice(s.as_bytes());
    }

    fn put_matrix(&mut self, m: &DMatrix<f64>) {
        self.put_u64(m.nrows() as u64);
        self.put_u64(m.ncols() as u64);
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                self.put_f64(m[(i, j)]);
            }
        }
    }

    fn put_f64_slice(&mut self, v: &[f64]) {
        self.put_u64(v.len() as u64);
        for &x in v {
            self.put_f64(x);
        }
    }
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(data: &'a [u8]) -> Self {
        Reader { data, pos: 0 }
    }

    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        if len > self.data.len() - self.pos {
            return Err(Error::format(format!(
                "archive truncated at offset {} (needed {len} bytes)",
                self.pos
            )));
        }
        let out = &self.data[self.pos..self.pos + len];
        self.pos += len;
        Ok(out)
    }

    fn u64(&mut self) -> Result<u64> {
        let b = self.take(8)?;
        Ok(u64::from_le_bytes(b.try_into().unwrap()))
    }

    fn i64(&mut self) -> Result<i64> {
        let b = self.take(8)?;
        Ok(i64::from_le_bytes(b.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        let b = self.take(8)?;
        Ok(f64::from_le_bytes(b.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u64()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| Error::format(format!("invalid UTF-8 name at offset {}", self.pos)))
    }

    fn matrix(&mut self) -> Result<DMatrix<f64>> {
        let rows = self.u64()? as usize;
        let cols = self.u64()? as usize;
        let fits = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(8))
            .is_some_and(|bytes| bytes <= self.data.len() - self.pos);
        if !fits {
            return Err(Error::format(format!(
                "matrix {rows}x{cols} at offset {} exceeds archive size",
                self.pos
            )));
        }
        let mut m = DMatrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = self.f64()?;
            }
        }
        Ok(m)
    }

    fn f64_vec(&mut self) -> Result<Vec<f64>> {
        let len = self.u64()? as usize;
        let fits = len
            .checked_mul(8)
            .is_some_and(|bytes| bytes <= self.data.len() - self.pos);
        if !fits {
            return Err(Error::format(format!(
                "vector of {len} floats at offset {} exceeds archive size",
                self.pos
            )));
        }
        (0..len).map(|_| self.f64()).collect()
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.data.len() {
            return Err(Error::format(format!(
                "{} trailing bytes at offset {}",
                self.data.len() - self.pos,
                self.pos
            )));
        }
        Ok(())
    }
}

fn encode_membership(w: &mut Writer, m: &MembershipMappingModel) {
    w.put_matrix(m.alpha());
    w.put_matrix(m.inducing_points());
    w.put_f64(m.kernel_params().sigma2);
    w.put_f64_slice(m.kernel_params().weights.as_slice());
    w.put_f64(m.nu());
    w.put_f64(m.beta());
    w.put_u64(m.beta_iters() as u64);
}

fn decode_membership(r: &mut Reader) -> Result<MembershipMappingModel> {
    let alpha = r.matrix()?;
    let inducing = r.matrix()?;
    let sigma2 = r.f64()?;
    let weights = DVector::from_vec(r.f64_vec()?);
    let nu = r.f64()?;
    let beta = r.f64()?;
    let beta_iters = r.u64()? as u32;
    MembershipMappingModel::from_parts(
        alpha,
        inducing,
        KernelParams::new(sigma2, weights)?,
        nu,
        beta,
        beta_iters,
    )
}

fn encode_cdmma(w: &mut Writer, m: &CdmmaModel) {
    w.put_u64(m.dim() as u64);
    w.put_u64(m.depth() as u64);
    for layer in m.layers() {
        w.put_matrix(&layer.projection);
        encode_membership(w, &layer.mapping);
    }
}

fn decode_cdmma(r: &mut Reader) -> Result<CdmmaModel> {
    let dim = r.u64()? as usize;
    let depth = r.u64()? as usize;
    let mut layers = Vec::with_capacity(depth);
    for _ in 0..depth {
        let projection = r.matrix()?;
        let mapping = decode_membership(r)?;
        layers.push(CdmmaLayer {
            projection,
            mapping,
        });
    }
    CdmmaModel::from_layers(layers, dim)
}

fn encode_wide(m: &WideCdmmaModel) -> Vec<u8> {
    let mut w = Writer::new();
    w.put_u64(m.bank_size() as u64);
    for sub in m.submodels() {
        encode_cdmma(&mut w, sub);
    }
    w.buf
}

fn decode_wide(bytes: &[u8]) -> Result<WideCdmmaModel> {
    let mut r = Reader::new(bytes);
    let banks = r.u64()? as usize;
    let mut submodels = Vec::with_capacity(banks);
    for _ in 0..banks {
        submodels.push(decode_cdmma(&mut r)?);
    }
    r.finish()?;
    WideCdmmaModel::from_submodels(submodels)
}

fn encode_labels(labels: &[i64]) -> Vec<u8> {
    let mut w = Writer::new();
    w.put_u64(labels.len() as u64);
    for &l in labels {
        w.put_i64(l);
    }
    w.buf
}

fn decode_labels(bytes: &[u8]) -> Result<Vec<i64>> {
    let mut r = Reader::new(bytes);
    let count = r.u64()? as usize;
    let labels = (0..count).map(|_| r.i64()).collect::<Result<Vec<_>>>()?;
    r.finish()?;
    Ok(labels)
}

fn encode_matrix_section(m: &DMatrix<f64>) -> Vec<u8> {
    let mut w = Writer::new();
    w.put_matrix(m);
    w.buf
}

fn decode_matrix_section(bytes: &[u8]) -> Result<DMatrix<f64>> {
    let mut r = Reader::new(bytes);
    let m = r.matrix()?;
    r.finish()?;
    Ok(m)
}

fn push_classifier(archive: &mut ModelArchive, prefix: &str, model: &ClassifierModel) {
    archive.push(format!("{prefix}labels"), encode_labels(model.labels()));
    for (c, wide) in model.class_models().iter().enumerate() {
        archive.push(format!("{prefix}class/{c}"), encode_wide(wide));
    }
}

fn read_classifier(archive: &ModelArchive, prefix: &str) -> Result<ClassifierModel> {
    let labels = decode_labels(archive.require(&format!("{prefix}labels"))?)?;
    let mut class_models = Vec::with_capacity(labels.len());
    for c in 0..labels.len() {
        let bytes = archive.require(&format!("{prefix}class/{c}"))?;
        class_models.push(decode_wide(bytes)?);
    }
    ClassifierModel::from_parts(class_models, labels)
}

/// Archive a classifier (one section per class) with an optional source
/// latent-subspace transformation matrix alongside.
pub fn classifier_to_archive(model: &ClassifierModel, v_sr: Option<&DMatrix<f64>>) -> ModelArchive {
    let mut archive = ModelArchive::new();
    archive.push("kind", b"classifier".to_vec());
    push_classifier(&mut archive, "", model);
    if let Some(v) = v_sr {
        archive.push("v_sr", encode_matrix_section(v));
    }
    archive
}

pub fn classifier_from_archive(
    archive: &ModelArchive,
) -> Result<(ClassifierModel, Option<DMatrix<f64>>)> {
    if archive_kind(archive)? != "classifier" {
        return Err(Error::format("archive does not hold a classifier"));
    }
    let model = read_classifier(archive, "")?;
    let v_sr = archive
        .find("v_sr")
        .map(decode_matrix_section)
        .transpose()?;
    Ok((model, v_sr))
}

pub fn transfer_to_archive(model: &TransferModel) -> ModelArchive {
    let mut archive = ModelArchive::new();
    archive.push("kind", b"transfer".to_vec());
    push_classifier(&mut archive, "source/", &model.source_classifier);
    push_classifier(&mut archive, "target/", &model.target_classifier);
    let mut w = Writer::new();
    encode_membership(&mut w, &model.s2t.mapping);
    archive.push("s2t", w.buf);
    archive.push("v_sr", encode_matrix_section(&model.v_sr));
    archive.push("v_tg", encode_matrix_section(&model.v_tg));
    archive
}

pub fn transfer_from_archive(archive: &ModelArchive) -> Result<TransferModel> {
    if archive_kind(archive)? != "transfer" {
        return Err(Error::format("archive does not hold a transfer model"));
    }
    let source_classifier = read_classifier(archive, "source/")?;
    let target_classifier = read_classifier(archive, "target/")?;
    let mut r = Reader::new(archive.require("s2t")?);
    let mapping = decode_membership(&mut r)?;
    r.finish()?;
    let v_sr = decode_matrix_section(archive.require("v_sr")?)?;
    let v_tg = decode_matrix_section(archive.require("v_tg")?)?;
    Ok(TransferModel {
        source_classifier,
        target_classifier,
        s2t: Source2TargetModel { mapping },
        v_sr,
        v_tg,
    })
}
