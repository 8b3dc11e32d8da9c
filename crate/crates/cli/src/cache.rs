//! Disk cache for expensive exact counts.
//!
//! Entries are JSON files named by the hash of their logical key (group
//! label with prime, twist, element, Weyl word, and so on). Writes go
//! through a temp file and an atomic rename, so concurrent runs sharing a
//! cache directory never observe torn entries. A corrupt or unreadable
//! entry is treated as absent and recomputed; the cache can only change how
//! fast an answer arrives, never the answer.

use std::fs;
use std::path::{Path, PathBuf};
use std::process;

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const CACHE_DIR_ENV: &str = "LUSZTIG_CACHE_DIR";

#[derive(Debug, Clone)]
pub struct Cache {
    dir: PathBuf,
}

impl Cache {
    pub fn open(dir: &Path) -> std::io::Result<Cache> {
        fs::create_dir_all(dir)?;
        Ok(Cache {
            dir: dir.to_path_buf(),
        })
    }

    /// Cache directory from the explicit flag, else the environment, else
    /// no caching.
    pub fn from_flag_or_env(flag: Option<&Path>) -> std::io::Result<Option<Cache>> {
        match flag {
            Some(dir) => Ok(Some(Cache::open(dir)?)),
            None => match std::env::var_os(CACHE_DIR_ENV) {
                Some(dir) => Ok(Some(Cache::open(Path::new(&dir))?)),
                None => Ok(None),
            },
        }
    }

    fn path_for(&self, key: &[&str]) -> PathBuf {
        let mut hasher = Sha256::new();
        for part in key {
            hasher.update(part.as_bytes());
            hasher.update([0x1f]);
        }
        let digest = hasher.finalize();
        let mut name = String::with_capacity(64);
        for byte in digest {
            name.push_str(&format!("{byte:02x}"));
        }
        name.push_str(".json");
        self.dir.join(name)
    }

    pub fn get<T: DeserializeOwned>(&self, key: &[&str]) -> Option<T> {
        let text = fs::read_to_string(self.path_for(key)).ok()?;
        serde_json::from_str(&text).ok()
    }

    pub fn put<T: Serialize>(&self, key: &[&str], value: &T) {
        let path = self.path_for(key);
        let tmp = path.with_extension(format!("tmp.{}", process::id()));
        let Ok(text) = serde_json::to_string(value) else {
            return;
        };
        if fs::write(&tmp, text).is_ok() {
            let _ = fs::rename(&tmp, &path);
        }
    }
}

/// Runs the computation through the cache when one is configured.
pub fn get_or_compute<T, E, F>(cache: Option<&Cache>, key: &[&str], compute: F) -> Result<T, E>
where
    T: Serialize + DeserializeOwned,
    F: FnOnce() -> Result<T, E>,
{
    if let Some(c) = cache {
        if let Some(hit) = c.get::<T>(key) {
            return Ok(hit);
        }
    }
    let value = compute()?;
    if let Some(c) = cache {
        c.put(key, &value);
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_values_and_survives_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Cache::open(dir.path()).unwrap();
        let key = ["demo", "GL2(F3)", "1,2"];
        assert_eq!(cache.get::<Vec<u32>>(&key), None);
        cache.put(&key, &vec![1u32, 2, 3]);
        assert_eq!(cache.get::<Vec<u32>>(&key), Some(vec![1, 2, 3]));

        // Corrupt entries behave as cache misses.
        fs::write(cache.path_for(&key), "not json").unwrap();
        assert_eq!(cache.get::<Vec<u32>>(&key), None);
        let recomputed: Result<Vec<u32>, ()> =
            get_or_compute(Some(&cache), &key, || Ok(vec![4, 5]));
        assert_eq!(recomputed.unwrap(), vec![4, 5]);
        assert_eq!(cache.get::<Vec<u32>>(&key), Some(vec![4, 5]));
    }

    #[test]
    fn distinct_keys_do_not_collide() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Cache::open(dir.path()).unwrap();
        // The separator keeps ["ab", "c"] and ["a", "bc"] apart.
        cache.put(&["ab", "c"], &1u32);
        cache.put(&["a", "bc"], &2u32);
        assert_eq!(cache.get::<u32>(&["ab", "c"]), Some(1));
        assert_eq!(cache.get::<u32>(&["a", "bc"]), Some(2));
    }

    #[test]
    fn compute_errors_pass_through_untouched() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Cache::open(dir.path()).unwrap();
        let out: Result<u32, String> =
            get_or_compute(Some(&cache), &["err"], || Err("boom".to_string()));
        assert_eq!(out.unwrap_err(), "boom");
        assert_eq!(cache.get::<u32>(&["err"]), None);
    }
}
