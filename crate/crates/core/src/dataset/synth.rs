//! Synthetic corpus forging: every page yields one well-designed original and
//! several jittered variants, each paired against the original.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::io::{read_jsonl, write_jsonl, ForgeLayout};
use super::{Choice, DatasetError, PreferencePair, QualityTag, Source, Split, UISample};
use crate::doc::{parse_document, Device, StyledDocument};
use crate::jitter::{apply_plan, sample_jitter_plan, DefectTag, JitterError, JitterPlan};
use crate::raster::{render, Bitmap, ExternalRenderer};
use crate::seed::{fnv1a, mix_seed, seeded_rng};

/// Sidecar manifest inside a corpus directory.
pub const CORPUS_MANIFEST: &str = "corpus.jsonl";
pub const DEFAULT_VARIANTS: usize = 3;
/// Plans that leave the rendering unchanged are redrawn up to this many times.
const MAX_PLAN_ATTEMPTS: u64 = 32;

/// One corpus page, with optional metadata from the sidecar manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    /// Path of the `.html` file relative to the corpus directory.
    pub path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caption: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub device: Option<Device>,
}

impl CorpusEntry {
    pub fn key(&self) -> String {
        self.url
            .clone()
            .unwrap_or_else(|| format!("file://{}", self.path))
    }
}

/// Lists the `.html` files of `dir` (sorted), attaching sidecar records where present.
pub fn load_corpus(dir: &Path) -> Result<Vec<CorpusEntry>, DatasetError> {
    let sidecar: BTreeMap<String, CorpusEntry> =
        read_jsonl::<CorpusEntry>(&dir.join(CORPUS_MANIFEST))?
            .into_iter()
            .map(|e| (e.path.clone(), e))
            .collect();
    let mut names: Vec<String> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().extension().is_some_and(|x| x == "html") && e.path().is_file())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    Ok(names
        .into_iter()
        .map(|name| {
            sidecar.get(&name).cloned().unwrap_or(CorpusEntry {
                path: name,
                url: None,
                caption: None,
                device: None,
            })
        })
        .collect())
}

/// Caption source order: sidecar caption, then `<title>`, then first heading text.
pub fn caption_for(entry: &CorpusEntry, doc: &StyledDocument) -> Option<String> {
    let nonempty = |s: &str| {
        let t = s.split_whitespace().collect::<Vec<_>>().join(" ");
        (!t.is_empty()).then_some(t)
    };
    entry
        .caption
        .as_deref()
        .and_then(nonempty)
        .or_else(|| doc.title.as_deref().and_then(nonempty))
        .or_else(|| {
            doc.nodes()
                .into_iter()
                .filter(|n| matches!(n.tag.as_str(), "h1" | "h2" | "h3" | "h4" | "h5" | "h6"))
                .find_map(|n| n.text_content.as_deref().and_then(nonempty))
        })
}

#[derive(Clone, Debug)]
pub struct ForgeOptions {
    pub variants_per_page: usize,
    pub seed: u64,
    pub renderer: Option<ExternalRenderer>,
}

impl Default for ForgeOptions {
    fn default() -> Self {
        Self {
            variants_per_page: DEFAULT_VARIANTS,
            seed: 0,
            renderer: None,
        }
    }
}

/// The plan that produced a jittered sample, and the tags it emitted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanRecord {
    pub sample_id: String,
    pub plan: JitterPlan,
    pub tags: Vec<DefectTag>,
}

#[derive(Clone, Debug, Default)]
pub struct ForgeOutput {
    pub samples: Vec<UISample>,
    pub pairs: Vec<PreferencePair>,
    pub plans: Vec<PlanRecord>,
}

fn sample_id(path: &str) -> String {
    let stem = Path::new(path)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    stem.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

struct Forger<'a> {
    corpus_dir: &'a Path,
    layout: ForgeLayout,
    opts: &'a ForgeOptions,
}

impl Forger<'_> {
    fn render(&self, doc: &StyledDocument, id: &str) -> Result<Bitmap, DatasetError> {
        match &self.opts.renderer {
            Some(r) => {
                let html_path: PathBuf = self.layout.root.join(format!(".{id}.html"));
                std::fs::write(&html_path, crate::doc::serialize(doc))?;
                let bmp = r.render(&html_path, doc);
                let _ = std::fs::remove_file(&html_path);
                Ok(bmp)
            }
            None => Ok(render(doc)),
        }
    }

    fn save(&self, bmp: &Bitmap, id: &str) -> Result<String, DatasetError> {
        let rel = format!("images/{id}.png");
        bmp.write_png(&self.layout.image_path(&rel))
            .map_err(|e| DatasetError::Validation(format!("writing {rel}: {e}")))?;
        Ok(rel)
    }

    fn forge_page(&self, entry: &CorpusEntry, out: &mut ForgeOutput) -> Result<(), DatasetError> {
        let html = std::fs::read_to_string(self.corpus_dir.join(&entry.path))?;
        let device = entry.device.unwrap_or(Device::Mobile);
        let doc =
            parse_document(&html, device).map_err(|e| DatasetError::Validation(e.to_string()))?;
        let caption = caption_for(entry, &doc).ok_or_else(|| {
            DatasetError::Validation(format!("{}: no caption source", entry.path))
        })?;
        let id = sample_id(&entry.path);
        let key = entry.key();
        let page_seed = mix_seed(self.opts.seed, fnv1a(entry.path.as_bytes()));

        let original_bmp = self.render(&doc, &id)?;
        let mut page = ForgeOutput::default();
        page.samples.push(UISample {
            id: id.clone(),
            image: self.save(&original_bmp, &id)?,
            caption: caption.clone(),
            quality: QualityTag::WellDesigned,
            defects: vec![],
            source: Source::Synthetic,
            device,
            origin_id: id.clone(),
            key: key.clone(),
            split: Split::Unassigned,
        });

        for j in 1..=self.opts.variants_per_page as u64 {
            let vid = format!("{id}-j{j}");
            let mut forged = None;
            for attempt in 0..MAX_PLAN_ATTEMPTS {
                let plan = sample_jitter_plan(mix_seed(page_seed, j * MAX_PLAN_ATTEMPTS + attempt));
                match apply_plan(&doc, &plan) {
                    Ok((jittered, tags)) => {
                        let bmp = self.render(&jittered, &vid)?;
                        if bmp != original_bmp {
                            forged = Some((plan, tags, bmp));
                            break;
                        }
                    }
                    Err(JitterError::AllJittersNoOp | JitterError::NoEligibleNodes(_)) => {}
                    Err(e) => return Err(DatasetError::Validation(e.to_string())),
                }
            }
            let Some((plan, tags, bmp)) = forged else {
                return Err(DatasetError::Validation(format!(
                    "{}: no effective jitter plan for {vid}",
                    entry.path
                )));
            };
            page.samples.push(UISample {
                id: vid.clone(),
                image: self.save(&bmp, &vid)?,
                caption: caption.clone(),
                quality: QualityTag::PoorDesign,
                defects: tags.clone(),
                source: Source::Synthetic,
                device,
                origin_id: id.clone(),
                key: key.clone(),
                split: Split::Unassigned,
            });
            let original_first = seeded_rng(mix_seed(page_seed, u64::MAX - j)).random_bool(0.5);
            let (a, b, preferred) = if original_first {
                (id.clone(), vid.clone(), Choice::A)
            } else {
                (vid.clone(), id.clone(), Choice::B)
            };
            page.pairs.push(PreferencePair {
                pair_id: format!("{vid}-pair"),
                a,
                b,
                preferred,
                principles: vec![],
                caption: caption.clone(),
                rater_id: None,
                cluster_id: None,
                split: Split::Unassigned,
                irrelevant: false,
                note: None,
            });
            page.plans.push(PlanRecord {
                sample_id: vid,
                plan,
                tags,
            });
        }
        out.samples.extend(page.samples);
        out.pairs.extend(page.pairs);
        out.plans.extend(page.plans);
        Ok(())
    }
}

/// Forges every page of `corpus_dir` into `out_dir` (images plus the three
/// manifests). Failing pages are logged and skipped.
pub fn synthesize_corpus(
    corpus_dir: &Path,
    out_dir: &Path,
    opts: &ForgeOptions,
) -> Result<ForgeOutput, DatasetError> {
    if opts.variants_per_page == 0 {
        return Err(DatasetError::Validation(
            "variants_per_page must be at least 1".into(),
        ));
    }
    let entries = load_corpus(corpus_dir)?;
    let layout = ForgeLayout::new(out_dir);
    std::fs::create_dir_all(layout.images())?;
    let forger = Forger {
        corpus_dir,
        layout: layout.clone(),
        opts,
    };
    let mut out = ForgeOutput::default();
    for entry in &entries {
        if let Err(err) = forger.forge_page(entry, &mut out) {
            tracing::warn!(page = %entry.path, %err, "skipping page");
        }
    }
    if out.samples.is_empty() {
        return Err(DatasetError::NoPagesSucceeded);
    }
    tracing::info!(
        pages = out.samples.len() / (opts.variants_per_page + 1),
        samples = out.samples.len(),
        "forged corpus"
    );
    write_jsonl(&layout.samples(), &out.samples)?;
    write_jsonl(&layout.pairs(), &out.pairs)?;
    write_jsonl(&layout.plans(), &out.plans)?;
    Ok(out)
}
