//! Self-contained acceptance fixture: clusters of audibly distinct
//! synthetic textures paired with cluster-specific metadata vocabularies,
//! written as WAV files plus a JSONL metadata file and a term list. Fully
//! seeded — identical inputs produce identical bytes, so fixtures can be
//! regenerated anywhere instead of shipped.

use std::f64::consts::TAU;
use std::fs;
use std::path::Path;

use serde_json::json;
use xmodal_core::rng::Rng;

use crate::wav::{write_wav, WavEncoding};
use crate::CliError;

pub const SAMPLE_RATE: u32 = 22_050;
pub const DURATION_S: f64 = 8.0;

/// One vocabulary per cluster; every word is lowercase letters, length ≥ 3,
/// and absent from the bundled stopword lists, so each survives text
/// normalization as itself.
const POOLS: [[&str; 10]; 3] = [
    [
        "bronze", "chime", "carillon", "tower", "resonance", "overtone", "strike", "peal",
        "campanile", "foundry",
    ],
    [
        "breeze", "static", "rustle", "seaside", "surf", "spray", "gust", "airflow", "drizzle",
        "foam",
    ],
    [
        "pulse", "drumbeat", "cadence", "mallet", "tempo", "march", "groove", "thump", "barrel",
        "stomp",
    ],
];

const LANGUAGES: [&str; 5] = ["en", "de", "it", "fr", "ro"];

#[derive(Clone, Copy, Debug)]
pub struct SynthSpec {
    pub tracks: usize,
    pub clusters: usize,
    pub seed: u64,
    /// Give the first two clusters one acoustic texture and one shared
    /// vocabulary: collection membership then cuts across both, while the
    /// text still matches the audio.
    pub shared_texture: bool,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.clusters < 2 || self.clusters > POOLS.len() {
            return Err(CliError::config("--clusters", "between 2 and 3 clusters"));
        }
        if self.tracks < self.clusters * 4 {
            return Err(CliError::config("--tracks", "at least four tracks per cluster"));
        }
        Ok(())
    }
}

/// Texture index and vocabulary pool index for a cluster.
fn cluster_layout(spec: &SynthSpec, cluster: usize) -> (usize, usize) {
    if spec.shared_texture && cluster <= 1 {
        (0, 0)
    } else {
        (cluster, cluster.min(POOLS.len() - 1))
    }
}

/// Generate the fixture under `out_dir`: `audio/<record_id>.wav`,
/// `metadata.jsonl`, `terms.txt`. Returns the number of tracks written.
pub fn generate(out_dir: &Path, spec: &SynthSpec) -> Result<usize, CliError> {
    spec.validate()?;
    let audio_dir = out_dir.join("audio");
    fs::create_dir_all(&audio_dir)?;
    let base = Rng::from_seed(spec.seed);
    let n_samples = (DURATION_S * SAMPLE_RATE as f64).round() as usize;

    let mut jsonl = String::new();
    for i in 0..spec.tracks {
        let cluster = i % spec.clusters;
        let within = i / spec.clusters;
        let (texture, pool_ix) = cluster_layout(spec, cluster);
        let pool = &POOLS[pool_ix];
        let mut rng = base.derive(i as u64 + 1);

        let record_id = format!("rec-{i:03}");
        let rel_audio = format!("audio/{record_id}.wav");
        // broadband noise at a per-track level: tracks of one cluster stop
        // being near-duplicates, so a freshly initialized encoder sees
        // overlapping within/cross-cluster distances and training has
        // margin violations to resolve
        let noise_level = rng.uniform(0.1, 0.8);
        let samples = render_texture(texture, &mut rng, n_samples, noise_level);
        write_wav(
            &audio_dir.join(format!("{record_id}.wav")),
            &samples,
            1,
            SAMPLE_RATE,
            WavEncoding::PcmInt16,
        )
        .map_err(|e| CliError::data(format!("{record_id}: {e}")))?;

        // every pool word appears in every record of its cluster, so the
        // token documents within a cluster are identical: within-cluster
        // text cosine is exactly 1 under any topic scaling, cross-cluster
        // pairs share only boilerplate, and each listed term matches the
        // whole cluster. Per-record variety (session number, language code)
        // sits in tokens that text normalization strips.
        let title = format!("{} {} session {}", pool[0], pool[1], within + 1);
        let subject: Vec<&str> = pool.to_vec();
        let description = format!(
            "field recording of {} and {} textures near the {} {}",
            pool[2], pool[3], pool[4], pool[5]
        );
        // constant per vocabulary pool so the year tokens reinforce the
        // cluster signal instead of adding per-record noise
        let year = 1890 + 60 * pool_ix;

        let row = json!({
            "record_id": record_id,
            "collection_id": format!("coll-{}", cluster + 1),
            "title": title,
            "subject": subject,
            "description": description,
            "language": LANGUAGES[i % LANGUAGES.len()],
            "year": year.to_string(),
            "type": "sound",
            "data_provider": "synthetic fixture archive",
            "audio_path": rel_audio,
        });
        jsonl.push_str(&row.to_string());
        jsonl.push('\n');
    }
    fs::write(out_dir.join("metadata.jsonl"), jsonl)?;

    let mut pools_used: Vec<usize> = (0..spec.clusters).map(|c| cluster_layout(spec, c).1).collect();
    pools_used.sort_unstable();
    pools_used.dedup();
    let mut terms = String::new();
    terms.push_str("# content terms for retrieval evaluation, one per line\n");
    for p in pools_used {
        for w in POOLS[p] {
            terms.push_str(w);
            terms.push('\n');
        }
    }
    fs::write(out_dir.join("terms.txt"), terms)?;
    Ok(spec.tracks)
}

/// Deterministic per-track texture synthesis; each texture family keeps to
/// its own spectral/temporal region so clusters stay separable, while the
/// per-track parameter spread plus `noise_level` broadband noise makes
/// tracks within a cluster genuinely diverse.
fn render_texture(texture: usize, rng: &mut Rng, n: usize, noise_level: f64) -> Vec<f32> {
    let sr = SAMPLE_RATE as f64;
    let mut raw: Vec<f64> = match texture {
        // inharmonic bell partials; fundamental spans a full octave and the
        // partial balance and tremolo vary per track
        0 => {
            let f0 = rng.uniform(330.0, 660.0);
            let ratios = [1.0, 2.76, 5.40];
            let amps = [1.0, rng.uniform(0.3, 0.9), rng.uniform(0.1, 0.6)];
            let phases: Vec<f64> = (0..3).map(|_| rng.uniform(0.0, TAU)).collect();
            let trem = rng.uniform(0.5, 2.5);
            let depth = rng.uniform(0.1, 0.5);
            (0..n)
                .map(|t| {
                    let ts = t as f64 / sr;
                    let env = 1.0 - depth * (0.5 - 0.5 * (TAU * trem * ts).cos());
                    env * ratios
                        .iter()
                        .zip(&amps)
                        .zip(&phases)
                        .map(|((&r, &a), &p)| a * (TAU * f0 * r * ts + p).sin())
                        .sum::<f64>()
                })
                .collect()
        }
        // dense random high band; the band center and density shift per
        // track inside 5.6–9.8 kHz
        1 => {
            let count = 30 + rng.next_below(51);
            let center = rng.uniform(6_800.0, 8_600.0);
            let parts: Vec<(f64, f64)> = (0..count)
                .map(|_| (center + rng.uniform(-1_200.0, 1_200.0), rng.uniform(0.0, TAU)))
                .collect();
            let scale = count as f64 / 8.0;
            (0..n)
                .map(|t| {
                    let ts = t as f64 / sr;
                    parts.iter().map(|&(f, p)| (TAU * f * ts + p).sin()).sum::<f64>() / scale
                })
                .collect()
        }
        // low thump train: decaying bursts plus a quiet rumble, with rate,
        // pitch, decay, and rumble drawn per track
        _ => {
            let rate = rng.uniform(2.0, 7.0);
            let f = rng.uniform(70.0, 220.0);
            let rumble_amp = rng.uniform(0.02, 0.12);
            let rumble_freq = rng.uniform(40.0, 70.0);
            let rumble_phase = rng.uniform(0.0, TAU);
            let tau = rng.uniform(0.03, 0.12);
            let onsets: Vec<f64> = {
                let count = (DURATION_S * rate).ceil() as usize + 1;
                (0..count).map(|k| k as f64 / rate + rng.uniform(0.0, 0.02)).collect()
            };
            (0..n)
                .map(|t| {
                    let ts = t as f64 / sr;
                    let bursts: f64 = onsets
                        .iter()
                        .filter(|&&o| ts >= o && ts - o < 0.5)
                        .map(|&o| {
                            let dt = ts - o;
                            (-dt / tau).exp() * (TAU * f * dt).sin()
                        })
                        .sum();
                    bursts + rumble_amp * (TAU * rumble_freq * ts + rumble_phase).sin()
                })
                .collect()
        }
    };
    if noise_level > 0.0 {
        let peak = raw.iter().fold(0.0f64, |m, &x| m.max(x.abs())).max(1e-9);
        let sigma = noise_level * peak;
        for x in raw.iter_mut() {
            *x += sigma * rng.normal();
        }
    }
    let peak = raw.iter().fold(0.0f64, |m, &x| m.max(x.abs())).max(1e-9);
    let gain = rng.uniform(0.40, 0.50) / peak;
    raw.iter().map(|&x| (x * gain) as f32).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wav::read_wav;

    fn spec() -> SynthSpec {
        SynthSpec { tracks: 12, clusters: 3, seed: 5, shared_texture: false }
    }

    #[test]
    fn regeneration_is_byte_identical() {
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        generate(d1.path(), &spec()).unwrap();
        generate(d2.path(), &spec()).unwrap();
        for name in ["metadata.jsonl", "terms.txt", "audio/rec-000.wav", "audio/rec-011.wav"] {
            assert_eq!(
                fs::read(d1.path().join(name)).unwrap(),
                fs::read(d2.path().join(name)).unwrap(),
                "{name} differs between identically seeded runs"
            );
        }
    }

    #[test]
    fn fixture_inventory_is_complete_and_playable() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(generate(dir.path(), &spec()).unwrap(), 12);
        let meta = fs::read_to_string(dir.path().join("metadata.jsonl")).unwrap();
        assert_eq!(meta.lines().count(), 12);
        for line in meta.lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            let rel = v["audio_path"].as_str().unwrap();
            let wav = read_wav(&dir.path().join(rel)).unwrap();
            assert_eq!(wav.sample_rate, SAMPLE_RATE);
            assert_eq!(wav.channels, 1);
            assert_eq!(wav.samples.len(), (DURATION_S * SAMPLE_RATE as f64) as usize);
            let peak = wav.samples.iter().fold(0.0f32, |m, &x| m.max(x.abs()));
            assert!(peak > 0.05 && peak <= 1.0, "peak {peak}");
        }
        let terms = fs::read_to_string(dir.path().join("terms.txt")).unwrap();
        assert_eq!(terms.lines().filter(|l| !l.starts_with('#')).count(), 30);
    }

    #[test]
    fn every_listed_term_matches_at_least_two_records() {
        // each record carries its entire cluster vocabulary, so every term
        // matches every record of its cluster
        let dir = tempfile::tempdir().unwrap();
        generate(dir.path(), &SynthSpec { tracks: 30, ..spec() }).unwrap();
        let meta = fs::read_to_string(dir.path().join("metadata.jsonl")).unwrap();
        let blobs: Vec<String> = meta.lines().map(|l| l.to_lowercase()).collect();
        for term in fs::read_to_string(dir.path().join("terms.txt"))
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with('#'))
        {
            let hits = blobs.iter().filter(|b| b.contains(term)).count();
            assert!(hits >= 2, "term {term} matches only {hits} records");
        }
    }

    #[test]
    fn metadata_relatedness_clears_mining_thresholds_with_margin() {
        use xmodal_core::corpus::{Corpus, Record};
        use xmodal_core::lsi::{build_tfidf, fit_lsi, FitOptions, SigmaScale, SvdMethod};
        use xmodal_core::textprep::{preprocess, StopwordTable};

        // positives are mined at cosine >= 0.8 and negatives below 0.5; the
        // fixture must keep every same-pool pair above the first line and
        // every cross-pool pair below the second, whichever scaling the
        // topic model is fit with
        let stop = StopwordTable::bundled();
        for shared in [false, true] {
            let dir = tempfile::tempdir().unwrap();
            let spec = SynthSpec { tracks: 30, clusters: 3, seed: 9, shared_texture: shared };
            generate(dir.path(), &spec).unwrap();
            let meta = fs::read_to_string(dir.path().join("metadata.jsonl")).unwrap();
            let records: Vec<Record> = meta
                .lines()
                .map(|line| {
                    let v: serde_json::Value = serde_json::from_str(line).unwrap();
                    let s = |k: &str| v[k].as_str().unwrap().to_string();
                    Record {
                        record_id: s("record_id"),
                        collection_id: s("collection_id"),
                        title: Some(s("title")),
                        subject: v["subject"]
                            .as_array()
                            .unwrap()
                            .iter()
                            .map(|w| w.as_str().unwrap().to_string())
                            .collect(),
                        description: Some(s("description")),
                        language: Some(s("language")),
                        year: Some(s("year")),
                        kind: Some(s("type")),
                        data_provider: Some(s("data_provider")),
                        audio_path: Some(s("audio_path")),
                        ..Record::default()
                    }
                })
                .collect();
            let corpus = Corpus::from_records(records).unwrap();
            let docs: Vec<_> = corpus
                .records()
                .iter()
                .map(|r| preprocess(&r.concat_metadata(), &stop))
                .collect();
            let (_, w) = build_tfidf(&docs).unwrap();
            for scale in [SigmaScale::None, SigmaScale::Sigma] {
                let opts = FitOptions { method: SvdMethod::Auto, scale, seed: 0 };
                let model = fit_lsi(&w, w.num_terms.min(w.num_docs), &opts).unwrap();
                let pool_of = |i: usize| cluster_layout(&spec, i % spec.clusters).1;
                let (mut min_same, mut max_cross) = (1.0f64, -1.0f64);
                for i in 0..spec.tracks {
                    for j in (i + 1)..spec.tracks {
                        let c = model.cosine(i, j).unwrap();
                        if pool_of(i) == pool_of(j) {
                            min_same = min_same.min(c);
                        } else {
                            max_cross = max_cross.max(c);
                        }
                    }
                }
                assert!(
                    min_same >= 0.99,
                    "shared={shared} {scale:?}: weakest same-pool cosine {min_same}"
                );
                assert!(
                    max_cross <= 0.45,
                    "shared={shared} {scale:?}: strongest cross-pool cosine {max_cross}"
                );
            }
        }
    }

    #[test]
    fn shared_texture_reuses_texture_and_pool_for_first_two_clusters() {
        let shared = SynthSpec { shared_texture: true, ..spec() };
        assert_eq!(cluster_layout(&shared, 0), (0, 0));
        assert_eq!(cluster_layout(&shared, 1), (0, 0));
        assert_eq!(cluster_layout(&shared, 2), (2, 2));
        assert_eq!(cluster_layout(&spec(), 1), (1, 1));
    }

    #[test]
    fn textures_occupy_distinct_spectral_bands() {
        // crude spectral centroid separates the three texture families
        let mut rng = Rng::from_seed(3);
        let n = 22_050;
        let centroid = |s: &[f32]| {
            // zero-crossing rate as a cheap frequency proxy
            let zc = s.windows(2).filter(|w| (w[0] < 0.0) != (w[1] < 0.0)).count();
            zc as f64 / s.len() as f64
        };
        let c0 = centroid(&render_texture(0, &mut rng, n, 0.0));
        let c1 = centroid(&render_texture(1, &mut rng, n, 0.0));
        let c2 = centroid(&render_texture(2, &mut rng, n, 0.0));
        assert!(c1 > 2.0 * c0, "hiss ({c1}) should cross far more than chime ({c0})");
        assert!(c0 > 2.0 * c2, "chime ({c0}) should cross far more than thumps ({c2})");
    }
}
