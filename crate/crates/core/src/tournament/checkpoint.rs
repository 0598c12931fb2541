//! On-disk run directory: a manifest, one file per finished game and, once
//! every game is present, the consolidated transcript record file.
//!
//! ```text
//! <out>/manifest.json
//! <out>/games/c0003-i0017.json
//! <out>/transcripts.jsonl
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};

use super::{ExperimentPlan, TournamentError};
use crate::game::GameTranscript;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const GAMES_DIR: &str = "games";
pub const TRANSCRIPTS_FILE: &str = "transcripts.jsonl";
pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub plan_fingerprint: String,
    pub planned_games: usize,
    pub plan: ExperimentPlan,
}

impl Manifest {
    pub fn for_plan(plan: &ExperimentPlan) -> Self {
        Self {
            schema_version: MANIFEST_SCHEMA_VERSION,
            plan_fingerprint: plan.fingerprint(),
            planned_games: plan.planned_games(),
            plan: plan.clone(),
        }
    }

    pub fn load(dir: &Path) -> Result<Self, TournamentError> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path)?;
        serde_json::from_str(&text).map_err(|e| TournamentError::Corrupt {
            path,
            message: e.to_string(),
        })
    }
}

pub fn game_file_name(cell: u32, iteration: u32) -> String {
    format!("c{cell:04}-i{iteration:04}.json")
}

/// Writes via a temporary sibling and a rename so a crash never leaves a
/// truncated file under the final name.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "path has no file name"))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

/// Creates the run directory or checks an existing one against `plan`.
pub fn open_run_dir(dir: &Path, plan: &ExperimentPlan) -> Result<Manifest, TournamentError> {
    fs::create_dir_all(dir.join(GAMES_DIR))?;
    let manifest = Manifest::for_plan(plan);
    if dir.join(MANIFEST_FILE).exists() {
        let existing = Manifest::load(dir)?;
        if existing.plan_fingerprint != manifest.plan_fingerprint {
            return Err(TournamentError::PlanMismatch {
                expected: existing.plan_fingerprint,
                found: manifest.plan_fingerprint,
            });
        }
        return Ok(existing);
    }
    let json = serde_json::to_string_pretty(&manifest)?;
    write_atomic(&dir.join(MANIFEST_FILE), json.as_bytes())?;
    Ok(manifest)
}

pub fn save_game(dir: &Path, game: &GameTranscript) -> Result<PathBuf, TournamentError> {
    let path = dir.join(GAMES_DIR).join(game_file_name(game.cell_index, game.iteration));
    let mut json = serde_json::to_vec(game)?;
    json.push(b'\n');
    write_atomic(&path, &json)?;
    Ok(path)
}

/// Games already on disk, keyed by (cell, iteration). Files that do not
/// parse, or whose seed disagrees with `plan`, are ignored and replayed.
pub fn load_games(dir: &Path, plan: &ExperimentPlan) -> Result<BTreeMap<(u32, u32), GameTranscript>, TournamentError> {
    let mut out = BTreeMap::new();
    let games_dir = dir.join(GAMES_DIR);
    if !games_dir.exists() {
        return Ok(out);
    }
    let n_cells = plan.cells().len() as u32;
    for entry in fs::read_dir(&games_dir)? {
        let path = entry?.path();
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        if name.starts_with('.') || !name.ends_with(".json") {
            continue;
        }
        let game: GameTranscript = match fs::read(&path).map_err(|e| e.to_string()).and_then(|b| {
            serde_json::from_slice(&b).map_err(|e| e.to_string())
        }) {
            Ok(g) => g,
            Err(e) => {
                warn!("ignoring unreadable checkpoint {}: {e}", path.display());
                continue;
            }
        };
        let expected_seed = crate::seed::derive_seed(plan.master_seed, game.cell_index.into(), game.iteration.into());
        if name != game_file_name(game.cell_index, game.iteration)
            || game.cell_index >= n_cells
            || game.iteration >= plan.iterations_per_cell
            || game.seed != expected_seed
        {
            warn!("ignoring checkpoint {} that does not belong to this plan", path.display());
            continue;
        }
        out.insert((game.cell_index, game.iteration), game);
    }
    Ok(out)
}
