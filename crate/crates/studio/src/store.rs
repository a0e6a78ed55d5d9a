//! The rating loop's state: the screenshot pool, caption clusters, the
//! calibration list, per-rater sessions and the append-only stores.
//!
//! Ratings are appended to the dataset's `samples.jsonl` / `pairs.jsonl`
//! (two derived samples, then the pair record) and fsynced before the
//! request is acknowledged. Exports take the same lock, so they only ever
//! see whole records.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use jitterlab_core::dataset::{
    append_jsonl, cluster_by_caption, ingest_rating, read_jsonl, ClusterAssignment, ForgeLayout,
    HashedTfEmbedder, PairDraft, PreferencePair, RatingSubmission, Split, UISample,
    DEFAULT_EPSILON, DEFAULT_MIN_SAMPLES,
};
use jitterlab_core::seed::seeded_rng;

use crate::StudioError;

/// Default number of calibration pairs every rater sees first.
pub const CALIBRATION_LEN: usize = 10;

/// One line of a calibration file. `pair_id` defaults to the id the sampler
/// would give the same two screenshots.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CalibrationEntry {
    #[serde(default)]
    pub pair_id: Option<String>,
    pub a: String,
    pub b: String,
}

/// The payload of `GET /api/pairs/next`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairPayload {
    pub pair_id: String,
    pub image_a: String,
    pub image_b: String,
    pub draft_caption: String,
    pub cluster_id: Option<u64>,
}

/// Body of `POST /api/ratings`; `rater` may instead come from the cookie.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatingRequest {
    pub pair_id: String,
    #[serde(default)]
    pub rater: Option<String>,
    pub caption: String,
    pub choice: jitterlab_core::dataset::Choice,
    #[serde(default)]
    pub principles: Vec<jitterlab_core::jitter::CrapPrinciple>,
    #[serde(default)]
    pub irrelevant: bool,
    #[serde(default)]
    pub note: Option<String>,
}

/// Id of a sampled pair: the two sample ids in served order.
pub fn draft_pair_id(a: &str, b: &str) -> String {
    format!("{a}|{b}")
}

/// Order-independent identity of a pair of screenshots.
fn pair_key(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

/// Rater ids are self-declared; they end up inside pair ids, so only a safe
/// alphabet is accepted.
pub fn validate_rater(rater: &str) -> Result<(), StudioError> {
    let ok = !rater.is_empty()
        && rater.len() <= 64
        && rater
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(StudioError::BadRequest(format!(
            "invalid rater id `{rater}`"
        )))
    }
}

/// URL under which a dataset-relative image path is served.
pub fn static_url(image: &str) -> String {
    format!("/static/{}", image.trim_start_matches('/'))
}

#[derive(Default)]
struct Session {
    /// Pairs served in this process lifetime (not persisted).
    served: BTreeSet<(String, String)>,
}

struct Mutable {
    sessions: HashMap<String, Session>,
    /// `(rater, pair key)` for every stored rating.
    rated: BTreeSet<(String, (String, String))>,
    rng: ChaCha8Rng,
}

pub struct RatingStore {
    layout: ForgeLayout,
    pool: BTreeMap<String, UISample>,
    clusters: ClusterAssignment,
    /// Cluster id → member ids (clusters with at least two members).
    members: BTreeMap<u64, Vec<String>>,
    calibration: Vec<PairDraft>,
    state: Mutex<Mutable>,
    /// Serializes appends against exports.
    files: RwLock<()>,
}

impl RatingStore {
    /// Opens a dataset directory. The pool is every sample not produced by
    /// a rating. Clusters come from `clusters.json` when present and are
    /// otherwise computed from captions with the default DBSCAN settings.
    pub fn open(
        dir: &Path,
        calibration: Option<&Path>,
        calibration_len: usize,
        seed: u64,
    ) -> Result<Self, StudioError> {
        let layout = ForgeLayout::new(dir);
        if !dir.is_dir() {
            return Err(StudioError::NotFound(format!(
                "data directory {}",
                dir.display()
            )));
        }
        let samples: Vec<UISample> = read_jsonl(&layout.samples())?;
        let pairs: Vec<PreferencePair> = read_jsonl(&layout.pairs())?;
        let by_id: BTreeMap<&str, &UISample> = samples.iter().map(|s| (s.id.as_str(), s)).collect();
        let rated_records: BTreeSet<&str> = pairs
            .iter()
            .filter(|p| p.rater_id.is_some())
            .flat_map(|p| [p.a.as_str(), p.b.as_str()])
            .collect();
        let pool: BTreeMap<String, UISample> = samples
            .iter()
            .filter(|s| !rated_records.contains(s.id.as_str()))
            .map(|s| (s.id.clone(), s.clone()))
            .collect();

        let clusters = if layout.clusters().exists() {
            serde_json::from_str(&fs::read_to_string(layout.clusters())?)
                .map_err(|e| StudioError::BadRequest(format!("bad clusters file: {e}")))?
        } else {
            let list: Vec<UISample> = pool.values().cloned().collect();
            cluster_by_caption(
                &list,
                DEFAULT_EPSILON,
                DEFAULT_MIN_SAMPLES,
                &HashedTfEmbedder::default(),
            )
        };
        let mut members: BTreeMap<u64, Vec<String>> = BTreeMap::new();
        for id in pool.keys() {
            if let Some(c) = clusters.get(id) {
                members.entry(c).or_default().push(id.clone());
            }
        }
        members.retain(|_, m| m.len() >= 2);

        let mut rated = BTreeSet::new();
        for p in &pairs {
            let Some(r) = &p.rater_id else { continue };
            let origin = |id: &str| {
                by_id
                    .get(id)
                    .map_or(id.to_string(), |s| s.origin_id.clone())
            };
            rated.insert((r.clone(), pair_key(&origin(&p.a), &origin(&p.b))));
        }

        let mut store = RatingStore {
            layout,
            pool,
            clusters,
            members,
            calibration: Vec::new(),
            state: Mutex::new(Mutable {
                sessions: HashMap::new(),
                rated,
                rng: seeded_rng(seed),
            }),
            files: RwLock::new(()),
        };
        store.calibration = match calibration {
            Some(path) => store.load_calibration(path)?,
            None => store.default_calibration(calibration_len, seed),
        };
        Ok(store)
    }

    fn draft(&self, pair_id: String, a: &str, b: &str) -> Result<PairDraft, StudioError> {
        let get = |id: &str| {
            self.pool
                .get(id)
                .cloned()
                .ok_or_else(|| StudioError::NotFound(format!("sample `{id}` is not in the pool")))
        };
        let (a, b) = (get(a)?, get(b)?);
        if a.id == b.id {
            return Err(StudioError::BadRequest(
                "a pair needs two distinct screenshots".into(),
            ));
        }
        let cluster_id = self.clusters.get(&a.id);
        Ok(PairDraft {
            pair_id,
            a,
            b,
            cluster_id,
        })
    }

    fn load_calibration(&self, path: &Path) -> Result<Vec<PairDraft>, StudioError> {
        let entries: Vec<CalibrationEntry> = read_jsonl(path)?;
        entries
            .into_iter()
            .map(|e| {
                let id = e
                    .pair_id
                    .clone()
                    .unwrap_or_else(|| draft_pair_id(&e.a, &e.b));
                self.draft(id, &e.a, &e.b)
            })
            .collect()
    }

    /// A seed-determined list drawn like regular pairs (uniform cluster,
    /// then two distinct members), without repeats.
    fn default_calibration(&self, len: usize, seed: u64) -> Vec<PairDraft> {
        let mut rng = seeded_rng(seed ^ 0xca11_b4a7);
        let mut taken = BTreeSet::new();
        let mut out = Vec::new();
        while out.len() < len {
            let Some((a, b)) = self.sample_pair(&taken, &mut rng) else {
                break;
            };
            taken.insert(pair_key(&a, &b));
            out.push(
                self.draft(draft_pair_id(&a, &b), &a, &b)
                    .expect("sampled ids are in the pool"),
            );
        }
        out
    }

    pub fn calibration(&self) -> &[PairDraft] {
        &self.calibration
    }

    pub fn pool_len(&self) -> usize {
        self.pool.len()
    }

    /// Uniform over clusters that still have an available pair, then
    /// uniform over that cluster's available pairs; sides are shuffled.
    fn sample_pair(
        &self,
        excluded: &BTreeSet<(String, String)>,
        rng: &mut ChaCha8Rng,
    ) -> Option<(String, String)> {
        let mut used: BTreeMap<u64, usize> = BTreeMap::new();
        for (a, b) in excluded {
            match (self.clusters.get(a), self.clusters.get(b)) {
                (Some(c), Some(d)) if c == d => *used.entry(c).or_default() += 1,
                _ => {}
            }
        }
        let open: Vec<u64> = self
            .members
            .iter()
            .filter(|(c, m)| used.get(c).copied().unwrap_or(0) < m.len() * (m.len() - 1) / 2)
            .map(|(&c, _)| c)
            .collect();
        let mut candidates = open;
        while !candidates.is_empty() {
            let i = rng.random_range(0..candidates.len());
            let c = candidates[i];
            let m = &self.members[&c];
            for _ in 0..64 {
                let x = rng.random_range(0..m.len());
                let y = rng.random_range(0..m.len());
                if x != y && !excluded.contains(&pair_key(&m[x], &m[y])) {
                    return Some((m[x].clone(), m[y].clone()));
                }
            }
            let mut avail = Vec::new();
            for x in 0..m.len() {
                for y in x + 1..m.len() {
                    if !excluded.contains(&pair_key(&m[x], &m[y])) {
                        avail.push((x, y));
                    }
                }
            }
            if let Some(&(x, y)) = avail.choose(rng) {
                return Some(if rng.random::<bool>() {
                    (m[x].clone(), m[y].clone())
                } else {
                    (m[y].clone(), m[x].clone())
                });
            }
            candidates.swap_remove(i);
        }
        None
    }

    fn payload(draft: &PairDraft) -> PairPayload {
        PairPayload {
            pair_id: draft.pair_id.clone(),
            image_a: static_url(&draft.a.image),
            image_b: static_url(&draft.b.image),
            draft_caption: draft.a.caption.clone(),
            cluster_id: draft.cluster_id,
        }
    }

    /// The next pair for `rater`: the first calibration pair they have
    /// neither rated nor been served, else a fresh random pair.
    pub fn next_pair(&self, rater: &str) -> Result<PairPayload, StudioError> {
        validate_rater(rater)?;
        let mut guard = self.state.lock().expect("state lock");
        let st = &mut *guard;
        let rated: BTreeSet<(String, String)> = st
            .rated
            .iter()
            .filter(|(r, _)| r == rater)
            .map(|(_, k)| k.clone())
            .collect();
        let session = st.sessions.entry(rater.to_string()).or_default();
        for d in &self.calibration {
            let key = pair_key(&d.a.id, &d.b.id);
            if !rated.contains(&key) && !session.served.contains(&key) {
                session.served.insert(key);
                return Ok(Self::payload(d));
            }
        }
        let mut excluded = rated;
        excluded.extend(session.served.iter().cloned());
        excluded.extend(self.calibration.iter().map(|d| pair_key(&d.a.id, &d.b.id)));
        let (a, b) = self.sample_pair(&excluded, &mut st.rng).ok_or_else(|| {
            StudioError::NotFound(format!("no unrated pairs left for rater `{rater}`"))
        })?;
        session.served.insert(pair_key(&a, &b));
        Ok(Self::payload(&self.draft(draft_pair_id(&a, &b), &a, &b)?))
    }

    fn resolve(&self, pair_id: &str) -> Result<PairDraft, StudioError> {
        if let Some(d) = self.calibration.iter().find(|d| d.pair_id == pair_id) {
            return Ok(d.clone());
        }
        let unknown = || StudioError::NotFound(format!("unknown pair `{pair_id}`"));
        let (a, b) = pair_id.split_once('|').ok_or_else(unknown)?;
        let d = self
            .draft(pair_id.to_string(), a, b)
            .map_err(|_| unknown())?;
        let same_cluster = d.cluster_id.is_some() && d.cluster_id == self.clusters.get(&d.b.id);
        if same_cluster {
            Ok(d)
        } else {
            Err(unknown())
        }
    }

    /// Validates, stores durably and returns the stored pair record.
    pub fn submit(&self, rater: &str, req: &RatingRequest) -> Result<PreferencePair, StudioError> {
        validate_rater(rater)?;
        let draft = self.resolve(&req.pair_id)?;
        let key = pair_key(&draft.a.id, &draft.b.id);
        let submission = RatingSubmission {
            caption: req.caption.clone(),
            choice: req.choice,
            principles: req.principles.clone(),
            irrelevant: req.irrelevant,
            note: req.note.clone(),
        };
        submission
            .validate()
            .map_err(|e| StudioError::Unprocessable(e.to_string()))?;
        let mut st = self.state.lock().expect("state lock");
        if st.rated.contains(&(rater.to_string(), key.clone())) {
            return Err(StudioError::Conflict(format!(
                "rater `{rater}` already rated pair `{}`",
                req.pair_id
            )));
        }
        let (pair, a, mut b) = ingest_rating(&draft, &submission, Some(rater))
            .map_err(|e| StudioError::Unprocessable(e.to_string()))?;
        if req.irrelevant {
            // The caption describes A only; B keeps its own stored caption.
            b.caption = draft.b.caption.clone();
        }
        {
            let _w = self.files.write().expect("file lock");
            append_jsonl(&self.layout.samples(), &a)?;
            append_jsonl(&self.layout.samples(), &b)?;
            append_jsonl(&self.layout.pairs(), &pair)?;
        }
        st.rated.insert((rater.to_string(), key));
        Ok(pair)
    }

    /// Both manifests as stored, samples first, optionally filtered to one
    /// split. Lines are emitted byte-for-byte.
    pub fn export(&self, split: Option<Split>) -> Result<Vec<u8>, StudioError> {
        let _r = self.files.read().expect("file lock");
        let mut out = Vec::new();
        for path in [self.layout.samples(), self.layout.pairs()] {
            let text = match fs::read_to_string(&path) {
                Ok(t) => t,
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
                Err(e) => return Err(e.into()),
            };
            for line in text.lines().filter(|l| !l.trim().is_empty()) {
                if let Some(want) = split {
                    if line_split(line)? != want {
                        continue;
                    }
                }
                out.extend_from_slice(line.as_bytes());
                out.push(b'\n');
            }
        }
        Ok(out)
    }

    pub fn data_dir(&self) -> &Path {
        &self.layout.root
    }
}

fn line_split(line: &str) -> Result<Split, StudioError> {
    #[derive(Deserialize)]
    struct WithSplit {
        #[serde(default)]
        split: Split,
    }
    serde_json::from_str::<WithSplit>(line)
        .map(|w| w.split)
        .map_err(|e| StudioError::Internal(format!("unparseable manifest line: {e}")))
}

/// Splits an export stream back into `(samples.jsonl, pairs.jsonl)` bytes;
/// pair records are the lines carrying a `pair_id`.
pub fn split_export(body: &[u8]) -> Result<(Vec<u8>, Vec<u8>), StudioError> {
    let text = std::str::from_utf8(body).map_err(|e| StudioError::BadRequest(e.to_string()))?;
    let (mut samples, mut pairs) = (Vec::new(), Vec::new());
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let v: serde_json::Value =
            serde_json::from_str(line).map_err(|e| StudioError::BadRequest(e.to_string()))?;
        let target = if v.get("pair_id").is_some() {
            &mut pairs
        } else {
            &mut samples
        };
        target.extend_from_slice(line.as_bytes());
        target.push(b'\n');
    }
    Ok((samples, pairs))
}

/// Where the manifests of a data directory live.
pub fn manifest_paths(dir: &Path) -> (PathBuf, PathBuf) {
    let l = ForgeLayout::new(dir);
    (l.samples(), l.pairs())
}
