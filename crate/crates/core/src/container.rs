//! On-disk format for a whole record.
//!
//! ```text
//! "GFS1"  u16 version  u16 reserved  u32 manifest_len  u32 manifest_crc32
//! manifest (JSON)
//! u64 data_len
//! data: blocks of { u16 tag, u16 flags, u32 len, payload }
//! ```
//!
//! The JSON manifest holds everything small and descriptive: stream metadata,
//! curation rules, provenance, the access log, the episode dictionary and the
//! CRC-32 of the data section. The data section holds the samples as
//! little-endian IEEE-754 doubles and unsigned integers. Optional statistics
//! are nested, length-prefixed sub-blocks, so a reader skips tags it does not
//! know and notes them in the provenance.
//!
//! All integers are little-endian.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::curation::{AccessLog, CurationRules};
use crate::dictionary::Dictionary;
use crate::hull::Point;
use crate::record::{Action, Provenance, StreamMeta, SummaryRecord};
use crate::stats::{tri_len, BinRule, BinSource, Family, Histogram, StatId, StatSet, SummarySample};
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"GFS1";
pub const VERSION: u16 = 1;

pub const TAG_SAMPLE: u16 = 1;
pub const TAG_COVARIANCE: u16 = 16;
pub const TAG_HULL: u16 = 17;
pub const TAG_HISTOGRAM: u16 = 18;
pub const TAG_SWV: u16 = 19;
pub const TAG_EPISODES: u16 = 20;

/// Block flag: readers that do not know the tag may skip the block.
pub const FLAG_OPTIONAL: u16 = 1;

const HEADER_LEN: usize = 16;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct StatName {
    id: u16,
    name: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Manifest {
    format: String,
    stream_meta: StreamMeta,
    ingested: u64,
    level_counts: Vec<usize>,
    statistic_ids: Vec<StatName>,
    rules: CurationRules,
    provenance: Provenance,
    access: AccessLog,
    dictionary: Option<Dictionary>,
    snippet: Vec<f64>,
    data_crc32: u32,
}

/// An extra block to embed when writing, as produced by a newer writer.
#[derive(Debug, Clone, PartialEq)]
pub struct Extension {
    pub tag: u16,
    pub payload: Vec<u8>,
    /// Nest inside every sample block instead of at top level.
    pub per_sample: bool,
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, v: &[f64]) {
        v.iter().for_each(|x| self.f64(*x));
    }
    fn block(&mut self, tag: u16, flags: u16, payload: &[u8]) {
        self.u16(tag);
        self.u16(flags);
        self.u32(payload.len() as u32);
        self.0.extend_from_slice(payload);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }
    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::Malformed(format!("truncated: need {n} bytes at offset {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        if self.remaining() / 8 < n {
            return Err(Error::Malformed(format!("truncated: {n} doubles at offset {}", self.pos)));
        }
        (0..n).map(|_| self.f64()).collect()
    }
    fn block(&mut self) -> Result<(u16, u16, &'a [u8])> {
        let tag = self.u16()?;
        let flags = self.u16()?;
        let len = self.u32()? as usize;
        Ok((tag, flags, self.take(len)?))
    }
}

fn write_histogram(h: &Histogram) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    match h.source {
        BinSource::Uniform(r) => {
            w.u8(0);
            w.u32(r.channel as u32);
            w.f64(r.lo);
            w.f64(r.hi);
            w.u32(r.bins);
        }
        BinSource::Dictionary { id, generation } => {
            w.u8(1);
            w.u64(id);
            w.u32(generation);
        }
    }
    w.u64(h.outlier);
    w.u32(h.bins.len() as u32);
    for (b, c) in &h.bins {
        w.u32(*b);
        w.u64(*c);
    }
    w.0
}

fn read_histogram(buf: &[u8]) -> Result<Histogram> {
    let mut r = Reader::new(buf);
    let source = match r.u8()? {
        0 => {
            let channel = r.u32()? as usize;
            let (lo, hi, bins) = (r.f64()?, r.f64()?, r.u32()?);
            BinSource::Uniform(BinRule::new(channel, lo, hi, bins).map_err(|e| Error::Malformed(e.to_string()))?)
        }
        1 => BinSource::Dictionary { id: r.u64()?, generation: r.u32()? },
        k => return Err(Error::Malformed(format!("histogram source kind {k}"))),
    };
    let mut h = Histogram::new(source);
    h.outlier = r.u64()?;
    let n = r.u32()?;
    for _ in 0..n {
        let b = r.u32()?;
        let c = r.u64()?;
        if h.bins.insert(b, c).is_some() {
            return Err(Error::Malformed(format!("duplicate histogram bin {b}")));
        }
    }
    Ok(h)
}

fn write_sample(level: usize, s: &SummarySample, ext: &[Extension]) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.u32(level as u32);
    w.u64(s.t_start);
    w.u64(s.t_end);
    w.u64(s.n);
    w.f64(s.weight);
    w.u32(s.channels() as u32);
    w.f64s(&s.mean);
    w.f64s(&s.variance);
    w.f64s(&s.min);
    w.f64s(&s.max);
    w.u16(s.dropped.0);
    w.u8(Family::code(s.family_hint));
    w.u8(0);
    if let Some(c) = &s.covariance {
        let mut p = Writer(Vec::new());
        p.f64s(c);
        w.block(TAG_COVARIANCE, FLAG_OPTIONAL, &p.0);
    }
    if let Some(h) = &s.hull {
        let mut p = Writer(Vec::new());
        p.u32(h.len() as u32);
        for pt in h {
            p.f64(pt[0]);
            p.f64(pt[1]);
        }
        w.block(TAG_HULL, FLAG_OPTIONAL, &p.0);
    }
    if let Some(h) = &s.histogram {
        w.block(TAG_HISTOGRAM, FLAG_OPTIONAL, &write_histogram(h));
    }
    if let Some(sw) = &s.swv {
        let mut p = Writer(Vec::new());
        p.u32(sw.len() as u32);
        for t in sw {
            p.u32(t.len() as u32);
            p.f64s(t);
        }
        w.block(TAG_SWV, FLAG_OPTIONAL, &p.0);
    }
    if let Some(h) = &s.episodes {
        w.block(TAG_EPISODES, FLAG_OPTIONAL, &write_histogram(h));
    }
    for e in ext.iter().filter(|e| e.per_sample) {
        w.block(e.tag, FLAG_OPTIONAL, &e.payload);
    }
    w.0
}

fn read_sample(buf: &[u8], skipped: &mut BTreeSet<u16>) -> Result<(usize, SummarySample)> {
    let mut r = Reader::new(buf);
    let level = r.u32()? as usize;
    let (t_start, t_end, n) = (r.u64()?, r.u64()?, r.u64()?);
    let weight = r.f64()?;
    let d = r.u32()? as usize;
    let mean = r.f64s(d)?;
    let variance = r.f64s(d)?;
    let min = r.f64s(d)?;
    let max = r.f64s(d)?;
    let dropped = StatSet(r.u16()?);
    let family_hint = Family::from_code(r.u8()?).ok_or_else(|| Error::Malformed("family code".into()))?;
    r.u8()?;
    let mut s = SummarySample {
        t_start,
        t_end,
        n,
        weight,
        mean,
        variance,
        min,
        max,
        covariance: None,
        hull: None,
        histogram: None,
        episodes: None,
        swv: None,
        family_hint,
        dropped,
    };
    while r.remaining() > 0 {
        let (tag, flags, payload) = r.block()?;
        let mut p = Reader::new(payload);
        match tag {
            TAG_COVARIANCE => {
                let c = p.f64s(tri_len(d))?;
                s.covariance = Some(c);
            }
            TAG_HULL => {
                let k = p.u32()? as usize;
                let flat = p.f64s(2 * k)?;
                s.hull = Some(flat.chunks(2).map(|c| [c[0], c[1]] as Point).collect());
            }
            TAG_HISTOGRAM => s.histogram = Some(read_histogram(payload)?),
            TAG_EPISODES => s.episodes = Some(read_histogram(payload)?),
            TAG_SWV => {
                let ch = p.u32()? as usize;
                if ch != d {
                    return Err(Error::Malformed(format!("swv for {ch} channels, sample has {d}")));
                }
                let mut sw = Vec::with_capacity(ch);
                for _ in 0..ch {
                    let len = p.u32()? as usize;
                    sw.push(p.f64s(len)?);
                }
                s.swv = Some(sw);
            }
            _ if flags & FLAG_OPTIONAL != 0 => {
                skipped.insert(tag);
                continue;
            }
            _ => return Err(Error::Malformed(format!("unknown required block {tag} in sample"))),
        }
        if p.remaining() > 0 && !matches!(tag, TAG_HISTOGRAM | TAG_EPISODES) {
            return Err(Error::Malformed(format!("trailing bytes in block {tag}")));
        }
    }
    Ok((level, s))
}

pub fn write(rec: &SummaryRecord) -> Vec<u8> {
    write_with_extensions(rec, &[])
}

/// Write with extra optional blocks; used to exercise forward compatibility.
pub fn write_with_extensions(rec: &SummaryRecord, ext: &[Extension]) -> Vec<u8> {
    let mut data = Writer(Vec::new());
    for (k, level) in rec.levels.iter().enumerate() {
        for s in level {
            data.block(TAG_SAMPLE, 0, &write_sample(k, s, ext));
        }
    }
    for e in ext.iter().filter(|e| !e.per_sample) {
        data.block(e.tag, FLAG_OPTIONAL, &e.payload);
    }
    let manifest = Manifest {
        format: "gfs-record".into(),
        stream_meta: rec.meta.clone(),
        ingested: rec.ingested,
        level_counts: rec.levels.iter().map(|l| l.len()).collect(),
        statistic_ids: StatId::ALL.iter().map(|s| StatName { id: *s as u16, name: s.name().into() }).collect(),
        rules: rec.rules.clone(),
        provenance: rec.provenance.clone(),
        access: rec.access.clone(),
        dictionary: rec.dictionary.clone(),
        snippet: rec.snippet.clone(),
        data_crc32: crc32fast::hash(&data.0),
    };
    let json = serde_json::to_vec_pretty(&manifest).expect("manifest values are finite");
    let mut out = Writer(Vec::with_capacity(HEADER_LEN + json.len() + 8 + data.0.len()));
    out.0.extend_from_slice(MAGIC);
    out.u16(VERSION);
    out.u16(0);
    out.u32(json.len() as u32);
    out.u32(crc32fast::hash(&json));
    out.0.extend_from_slice(&json);
    out.u64(data.0.len() as u64);
    out.0.extend_from_slice(&data.0);
    out.0
}

/// Parse and validate a container.
pub fn read(bytes: &[u8]) -> Result<SummaryRecord> {
    let mut r = Reader::new(bytes);
    if r.remaining() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::BadMagic);
    }
    r.take(4)?;
    let version = r.u16()?;
    if version != VERSION {
        return Err(Error::VersionUnsupported(version));
    }
    r.u16()?;
    let mlen = r.u32()? as usize;
    let mcrc = r.u32()?;
    let json = r.take(mlen)?;
    let computed = crc32fast::hash(json);
    if computed != mcrc {
        return Err(Error::ChecksumMismatch { stored: mcrc, computed });
    }
    let manifest: Manifest = serde_json::from_slice(json).map_err(|e| Error::Malformed(format!("manifest: {e}")))?;
    let dlen = r.u64()? as usize;
    let data = r.take(dlen)?;
    if r.remaining() != 0 {
        return Err(Error::Malformed(format!("{} trailing bytes", r.remaining())));
    }
    let computed = crc32fast::hash(data);
    if computed != manifest.data_crc32 {
        return Err(Error::ChecksumMismatch { stored: manifest.data_crc32, computed });
    }

    let mut levels: Vec<std::collections::VecDeque<SummarySample>> =
        manifest.level_counts.iter().map(|_| Default::default()).collect();
    let mut skipped = BTreeSet::new();
    let mut dr = Reader::new(data);
    while dr.remaining() > 0 {
        let (tag, flags, payload) = dr.block()?;
        match tag {
            TAG_SAMPLE => {
                let (k, s) = read_sample(payload, &mut skipped)?;
                if s.channels() != manifest.stream_meta.channels {
                    return Err(Error::InvariantViolation(format!("sample at {} has wrong channel count", s.t_start)));
                }
                levels
                    .get_mut(k)
                    .ok_or_else(|| Error::InvariantViolation(format!("sample at undeclared level {k}")))?
                    .push_back(s);
            }
            _ if flags & FLAG_OPTIONAL != 0 => {
                skipped.insert(tag);
            }
            _ => return Err(Error::Malformed(format!("unknown required block {tag}"))),
        }
    }
    let counts: Vec<usize> = levels.iter().map(|l| l.len()).collect();
    if counts != manifest.level_counts {
        return Err(Error::InvariantViolation("level sample counts disagree with the manifest".into()));
    }
    manifest.rules.validate().map_err(|e| Error::InvariantViolation(e.to_string()))?;
    let mut rec = SummaryRecord {
        meta: manifest.stream_meta,
        levels,
        ingested: manifest.ingested,
        rules: manifest.rules,
        provenance: manifest.provenance,
        access: manifest.access,
        dictionary: manifest.dictionary,
        snippet: manifest.snippet,
    };
    for tag in skipped {
        rec.provenance.push(Action::Note { text: format!("skipped unknown optional block {tag}") });
    }
    rec.check_invariants()?;
    Ok(rec)
}
