//! Episode recording, the portable on-disk dataset format, shuffling,
//! and support/query splitting.
//!
//! Episode files are little-endian binary (`VMEP`), checkpoints use the
//! `VMWT` tensor container, and each dataset directory carries a TOML
//! manifest describing its episodes.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::render::{render_eih, render_pose, camera_pose, CameraConfig, Image};
use crate::sim::{
    expert_action, is_success, reset, step, Action, ObjectConfig, WorldState, MAX_STEPS,
};
use crate::rng::SeedStream;

pub const EPISODE_MAGIC: &[u8; 4] = b"VMEP";
pub const CHECKPOINT_MAGIC: &[u8; 4] = b"VMWT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("bad magic in {0}")]
    BadMagic(PathBuf),
    #[error("version mismatch in {path}: found {found}, expected {expected}")]
    VersionMismatch { path: PathBuf, found: u32, expected: u32 },
    #[error("truncated file {0}")]
    Truncated(PathBuf),
    #[error("dimension mismatch in {path}: {detail}")]
    DimensionMismatch { path: PathBuf, detail: String },
    #[error("manifest error in {path}: {detail}")]
    Manifest { path: PathBuf, detail: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub ext_image: Image,
    pub eih_image: Image,
    /// (ee_x, ee_y, ee_z, gripper in {0,1})
    pub proprio: [f32; 4],
    /// (dx, dy, dz, grip in {0,1}) from the expert at this state
    pub expert_action: [f32; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub frames: Vec<Frame>,
    pub object_config: ObjectConfig,
    pub camera_config: CameraConfig,
    pub seed: u64,
    pub producer: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub episodes: Vec<Episode>,
    pub master_seed: u64,
    pub producer: String,
}

impl Dataset {
    pub fn total_frames(&self) -> usize {
        self.episodes.iter().map(|e| e.frames.len()).sum()
    }
}

/// Anything that can drive a rollout; the recorded actions always come
/// from the expert regardless of the driver.
pub trait ActionSource {
    fn act(&mut self, s: &WorldState, ext: &Image, eih: &Image) -> Action;
}

/// The scripted expert as a driver.
pub struct ExpertSource;

impl ActionSource for ExpertSource {
    fn act(&mut self, s: &WorldState, _ext: &Image, _eih: &Image) -> Action {
        expert_action(s)
    }
}

/// Expert plus small seeded displacement jitter; used to diversify the
/// baseline trajectories replayed under new cameras.
pub struct JitteredExpert {
    pub rng: SeedStream,
    pub amplitude: f64,
}

impl ActionSource for JitteredExpert {
    fn act(&mut self, s: &WorldState, _ext: &Image, _eih: &Image) -> Action {
        let mut a = expert_action(s);
        for d in &mut a.dpos {
            *d = (*d + self.rng.gen_range(-self.amplitude..=self.amplitude))
                .clamp(-crate::sim::MAX_DPOS, crate::sim::MAX_DPOS);
        }
        a
    }
}

/// Wraps a driver and logs every action it takes, so the trajectory can be
/// replayed later under a different camera.
pub struct TapSource<'a, P: ActionSource> {
    pub inner: &'a mut P,
    pub log: Vec<Action>,
}

impl<'a, P: ActionSource> TapSource<'a, P> {
    pub fn new(inner: &'a mut P) -> Self {
        Self { inner, log: Vec::new() }
    }
}

impl<P: ActionSource> ActionSource for TapSource<'_, P> {
    fn act(&mut self, s: &WorldState, ext: &Image, eih: &Image) -> Action {
        let a = self.inner.act(s, ext, eih);
        self.log.push(a);
        a
    }
}

/// Replays a stored action sequence step-for-step; the kinematics are
/// deterministic, so the visited world states match the original rollout
/// exactly regardless of camera.
pub struct ReplaySource {
    pub actions: Vec<Action>,
    pub next: usize,
}

impl ReplaySource {
    pub fn new(actions: Vec<Action>) -> Self {
        Self { actions, next: 0 }
    }
}

impl ActionSource for ReplaySource {
    fn act(&mut self, _s: &WorldState, _ext: &Image, _eih: &Image) -> Action {
        let a = self.actions[self.next];
        self.next += 1;
        a
    }
}

pub fn proprio_of(s: &WorldState) -> [f32; 4] {
    [
        s.ee_pos[0] as f32,
        s.ee_pos[1] as f32,
        s.ee_pos[2] as f32,
        if s.gripper_closed { 1.0 } else { 0.0 },
    ]
}

fn action_vec(a: &Action) -> [f32; 4] {
    [
        a.dpos[0] as f32,
        a.dpos[1] as f32,
        a.dpos[2] as f32,
        if a.grip { 1.0 } else { 0.0 },
    ]
}

/// Roll out `policy` from `reset(cfg)` for at most 60 steps (or until task
/// success), rendering both cameras and storing the expert's action at
/// every visited state.
pub fn record_episode<P: ActionSource>(
    policy: &mut P,
    cfg: &ObjectConfig,
    cam: &CameraConfig,
    seed: u64,
    producer: &str,
) -> Episode {
    let pose = camera_pose(&cam.clamped());
    let mut s = reset(cfg);
    let mut frames = Vec::new();
    for _ in 0..MAX_STEPS {
        let ext = render_pose(&s, &pose);
        let eih = render_eih(&s);
        let expert = expert_action(&s);
        let taken = policy.act(&s, &ext, &eih);
        frames.push(Frame {
            ext_image: ext,
            eih_image: eih,
            proprio: proprio_of(&s),
            expert_action: action_vec(&expert),
        });
        s = step(&s, &taken);
        if is_success(&s) {
            break;
        }
    }
    Episode {
        frames,
        object_config: *cfg,
        camera_config: *cam,
        seed,
        producer: producer.to_string(),
    }
}

// --- episode file format ---------------------------------------------------

pub fn save_episode_file(ep: &Episode, path: &Path) -> Result<(), DataError> {
    let (h, w) = match ep.frames.first() {
        Some(f) => (f.ext_image.height as u16, f.ext_image.width as u16),
        None => (0, 0),
    };
    let mut buf = Vec::new();
    buf.extend_from_slice(EPISODE_MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(ep.frames.len() as u32).to_le_bytes());
    buf.extend_from_slice(&h.to_le_bytes());
    buf.extend_from_slice(&w.to_le_bytes());
    for f in &ep.frames {
        buf.extend_from_slice(&f.ext_image.pixels);
        buf.extend_from_slice(&f.eih_image.pixels);
        for v in f.proprio {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for v in f.expert_action {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, buf)?;
    Ok(())
}

/// Frame payload without episode metadata (that lives in the manifest).
pub fn load_episode_file(path: &Path) -> Result<Vec<Frame>, DataError> {
    let buf = fs::read(path)?;
    let need = |n: usize| -> Result<(), DataError> {
        if buf.len() < n {
            Err(DataError::Truncated(path.to_path_buf()))
        } else {
            Ok(())
        }
    };
    need(16)?;
    if &buf[..4] != EPISODE_MAGIC {
        return Err(DataError::BadMagic(path.to_path_buf()));
    }
    let version = u32::from_le_bytes(buf[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(DataError::VersionMismatch {
            path: path.to_path_buf(),
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let count = u32::from_le_bytes(buf[8..12].try_into().unwrap()) as usize;
    let h = u16::from_le_bytes(buf[12..14].try_into().unwrap()) as usize;
    let w = u16::from_le_bytes(buf[14..16].try_into().unwrap()) as usize;
    let img_bytes = h * w * 3;
    let frame_bytes = 2 * img_bytes + 8 * 4;
    need(16 + count * frame_bytes)?;
    if buf.len() != 16 + count * frame_bytes {
        return Err(DataError::DimensionMismatch {
            path: path.to_path_buf(),
            detail: format!(
                "file has {} trailing bytes",
                buf.len() - (16 + count * frame_bytes)
            ),
        });
    }
    let mut frames = Vec::with_capacity(count);
    let mut o = 16;
    for _ in 0..count {
        let ext = Image {
            width: w as u32,
            height: h as u32,
            pixels: buf[o..o + img_bytes].to_vec(),
        };
        o += img_bytes;
        let eih = Image {
            width: w as u32,
            height: h as u32,
            pixels: buf[o..o + img_bytes].to_vec(),
        };
        o += img_bytes;
        let mut proprio = [0f32; 4];
        for v in &mut proprio {
            *v = f32::from_le_bytes(buf[o..o + 4].try_into().unwrap());
            o += 4;
        }
        let mut expert = [0f32; 4];
        for v in &mut expert {
            *v = f32::from_le_bytes(buf[o..o + 4].try_into().unwrap());
            o += 4;
        }
        frames.push(Frame {
            ext_image: ext,
            eih_image: eih,
            proprio,
            expert_action: expert,
        });
    }
    Ok(frames)
}

// --- dataset directory -----------------------------------------------------

/// TOML integers are i64, so full-range u64 seeds go through hex strings.
mod hex_u64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{v:016x}"))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        let s = String::deserialize(d)?;
        u64::from_str_radix(&s, 16).map_err(serde::de::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
struct ManifestEpisode {
    file: String,
    frames: u32,
    #[serde(with = "hex_u64")]
    seed: u64,
    producer: String,
    obj_xy: [f64; 2],
    goal_xy: [f64; 2],
    #[serde(with = "hex_u64")]
    obj_seed: u64,
    camera: CameraConfig,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    version: u32,
    producer: String,
    #[serde(with = "hex_u64")]
    master_seed: u64,
    episodes: Vec<ManifestEpisode>,
}

pub fn save_dataset(ds: &Dataset, dir: &Path) -> Result<(), DataError> {
    fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(ds.episodes.len());
    for (i, ep) in ds.episodes.iter().enumerate() {
        let name = format!("ep{i:05}.vmep");
        save_episode_file(ep, &dir.join(&name))?;
        entries.push(ManifestEpisode {
            file: name,
            frames: ep.frames.len() as u32,
            seed: ep.seed,
            producer: ep.producer.clone(),
            obj_xy: ep.object_config.obj_xy,
            goal_xy: ep.object_config.goal_xy,
            obj_seed: ep.object_config.seed,
            camera: ep.camera_config,
        });
    }
    let manifest = Manifest {
        version: FORMAT_VERSION,
        producer: ds.producer.clone(),
        master_seed: ds.master_seed,
        episodes: entries,
    };
    let text = toml::to_string(&manifest).map_err(|e| DataError::Manifest {
        path: dir.join("manifest.toml"),
        detail: e.to_string(),
    })?;
    fs::write(dir.join("manifest.toml"), text)?;
    Ok(())
}

pub fn load_dataset(dir: &Path) -> Result<Dataset, DataError> {
    let mpath = dir.join("manifest.toml");
    let text = fs::read_to_string(&mpath)?;
    let manifest: Manifest = toml::from_str(&text).map_err(|e| DataError::Manifest {
        path: mpath.clone(),
        detail: e.to_string(),
    })?;
    if manifest.version != FORMAT_VERSION {
        return Err(DataError::VersionMismatch {
            path: mpath,
            found: manifest.version,
            expected: FORMAT_VERSION,
        });
    }
    let mut episodes = Vec::with_capacity(manifest.episodes.len());
    for e in &manifest.episodes {
        let frames = load_episode_file(&dir.join(&e.file))?;
        if frames.len() != e.frames as usize {
            return Err(DataError::DimensionMismatch {
                path: dir.join(&e.file),
                detail: format!(
                    "manifest says {} frames, file has {}",
                    e.frames,
                    frames.len()
                ),
            });
        }
        episodes.push(Episode {
            frames,
            object_config: ObjectConfig {
                obj_xy: e.obj_xy,
                goal_xy: e.goal_xy,
                seed: e.obj_seed,
            },
            camera_config: e.camera,
            seed: e.seed,
            producer: e.producer.clone(),
        });
    }
    Ok(Dataset {
        episodes,
        master_seed: manifest.master_seed,
        producer: manifest.producer,
    })
}

// --- checkpoint (tensor container) -----------------------------------------

pub fn save_tensors(path: &Path, tensors: &[(String, Vec<usize>, Vec<f32>)]) -> Result<(), DataError> {
    let mut buf = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, dims, data) in tensors {
        let n: usize = dims.iter().product();
        assert_eq!(n, data.len(), "tensor {name} dims/data mismatch");
        buf.extend_from_slice(&(name.len() as u16).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.push(dims.len() as u8);
        for d in dims {
            buf.extend_from_slice(&(*d as u32).to_le_bytes());
        }
        for v in data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

pub fn load_tensors(path: &Path) -> Result<Vec<(String, Vec<usize>, Vec<f32>)>, DataError> {
    let mut buf = Vec::new();
    fs::File::open(path)?.read_to_end(&mut buf)?;
    let trunc = || DataError::Truncated(path.to_path_buf());
    if buf.len() < 12 {
        return Err(trunc());
    }
    if &buf[..4] != CHECKPOINT_MAGIC {
        return Err(DataError::BadMagic(path.to_path_buf()));
    }
    let version = u32::from_le_bytes(buf[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(DataError::VersionMismatch {
            path: path.to_path_buf(),
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let count = u32::from_le_bytes(buf[8..12].try_into().unwrap()) as usize;
    let mut o = 12;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        if buf.len() < o + 2 {
            return Err(trunc());
        }
        let nlen = u16::from_le_bytes(buf[o..o + 2].try_into().unwrap()) as usize;
        o += 2;
        if buf.len() < o + nlen + 1 {
            return Err(trunc());
        }
        let name = String::from_utf8_lossy(&buf[o..o + nlen]).into_owned();
        o += nlen;
        let rank = buf[o] as usize;
        o += 1;
        if buf.len() < o + 4 * rank {
            return Err(trunc());
        }
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(u32::from_le_bytes(buf[o..o + 4].try_into().unwrap()) as usize);
            o += 4;
        }
        let n: usize = dims.iter().product();
        if buf.len() < o + 4 * n {
            return Err(trunc());
        }
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(f32::from_le_bytes(buf[o..o + 4].try_into().unwrap()));
            o += 4;
        }
        out.push((name, dims, data));
    }
    if o != buf.len() {
        return Err(DataError::DimensionMismatch {
            path: path.to_path_buf(),
            detail: format!("{} trailing bytes", buf.len() - o),
        });
    }
    Ok(out)
}

// --- shuffling and splitting -----------------------------------------------

/// Deterministic permutation over all (episode, frame) positions.
pub fn shuffle_frames(ds: &Dataset, seed: u64) -> Vec<(usize, usize)> {
    let mut idx = Vec::with_capacity(ds.total_frames());
    for (e, ep) in ds.episodes.iter().enumerate() {
        for f in 0..ep.frames.len() {
            idx.push((e, f));
        }
    }
    let mut s = SeedStream::new(seed, "shuffle-frames", 0);
    let perm = s.permutation(idx.len());
    perm.into_iter().map(|i| idx[i]).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportQuerySplit {
    /// Episode indices, grouped so all episodes of one object config land
    /// on one side.
    pub support: Vec<usize>,
    pub query: Vec<usize>,
}

fn config_key(c: &ObjectConfig) -> [u64; 4] {
    [
        c.obj_xy[0].to_bits(),
        c.obj_xy[1].to_bits(),
        c.goal_xy[0].to_bits(),
        c.goal_xy[1].to_bits(),
    ]
}

/// Split episodes at object-config granularity: `n_support_configs` distinct
/// configs (chosen by seeded shuffle) go to support, the rest to query.
pub fn split_support_query(
    episodes: &[Episode],
    n_support_configs: usize,
    seed: u64,
) -> Result<SupportQuerySplit, String> {
    let mut configs: Vec<[u64; 4]> = Vec::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, ep) in episodes.iter().enumerate() {
        let key = config_key(&ep.object_config);
        match configs.iter().position(|c| *c == key) {
            Some(g) => groups[g].push(i),
            None => {
                configs.push(key);
                groups.push(vec![i]);
            }
        }
    }
    if groups.len() < n_support_configs + 1 {
        return Err(format!(
            "need at least {} distinct object configs, have {}",
            n_support_configs + 1,
            groups.len()
        ));
    }
    let mut s = SeedStream::new(seed, "support-query", 0);
    let perm = s.permutation(groups.len());
    let mut support = Vec::new();
    let mut query = Vec::new();
    for (rank, &g) in perm.iter().enumerate() {
        if rank < n_support_configs {
            support.extend(&groups[g]);
        } else {
            query.extend(&groups[g]);
        }
    }
    support.sort_unstable();
    query.sort_unstable();
    Ok(SupportQuerySplit { support, query })
}
