//! Content-addressed response cache: one JSON file per key under the run's
//! cache directory. Writes go through a temp file and rename, so concurrent
//! read-through stays atomic and identical keys settle last-writer-wins.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use super::{ChatTurn, GatewayError};

static TEMP_COUNTER: AtomicU64 = AtomicU64::new(0);

fn entry_path(cache_dir: &Path, key: &str) -> PathBuf {
    cache_dir.join(format!("{key}.json"))
}

pub(super) fn read(cache_dir: &Path, key: &str) -> Result<Option<ChatTurn>, GatewayError> {
    let path = entry_path(cache_dir, key);
    let bytes = match std::fs::read(&path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(GatewayError::CacheCorrupt(format!("{}: {e}", path.display()))),
    };
    serde_json::from_slice(&bytes)
        .map(Some)
        .map_err(|e| GatewayError::CacheCorrupt(format!("{}: {e}", path.display())))
}

pub(super) fn write(cache_dir: &Path, key: &str, turn: &ChatTurn) -> Result<(), GatewayError> {
    std::fs::create_dir_all(cache_dir)
        .map_err(|e| GatewayError::CacheCorrupt(format!("creating {}: {e}", cache_dir.display())))?;
    let unique = TEMP_COUNTER.fetch_add(1, Ordering::SeqCst);
    let tmp = cache_dir.join(format!(".tmp-{key}-{}-{unique}", std::process::id()));
    let body = serde_json::to_vec(turn)
        .map_err(|e| GatewayError::CacheCorrupt(format!("serializing entry: {e}")))?;
    std::fs::write(&tmp, body)
        .map_err(|e| GatewayError::CacheCorrupt(format!("{}: {e}", tmp.display())))?;
    let path = entry_path(cache_dir, key);
    std::fs::rename(&tmp, &path)
        .map_err(|e| GatewayError::CacheCorrupt(format!("{}: {e}", path.display())))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::{
        cache_key, Gateway, GenerationParams, ModelRef, ScriptFile, ScriptReply,
    };
    use super::*;
    use crate::env::ArgValue;
    use std::collections::BTreeMap;

    #[test]
    fn second_identical_call_hits_the_cache() {
        let dir = tempfile::tempdir().unwrap();
        let gateway = Gateway::new();
        let model = ModelRef::scripted(
            "m",
            ScriptFile::ordered([ScriptReply::content("only reply")]),
        );
        let turns = vec![ChatTurn::user("q")];
        let params = GenerationParams::default();
        let first = gateway
            .cached_complete(dir.path(), &model, &turns, &params, None)
            .unwrap();
        // the script is now exhausted; a cache hit is the only way to succeed
        let second = gateway
            .cached_complete(dir.path(), &model, &turns, &params, None)
            .unwrap();
        assert_eq!(first, second);
        assert_eq!(gateway.transport_ops(), 0);
    }

    #[test]
    fn differing_params_take_distinct_entries() {
        let dir = tempfile::tempdir().unwrap();
        let gateway = Gateway::new();
        let model = ModelRef::scripted(
            "m",
            ScriptFile::ordered([ScriptReply::content("a"), ScriptReply::content("b")]),
        );
        let turns = vec![ChatTurn::user("q")];
        let cold = GenerationParams::default();
        let warm = GenerationParams { temperature: 0.9, ..cold.clone() };
        let first = gateway
            .cached_complete(dir.path(), &model, &turns, &cold, None)
            .unwrap();
        let second = gateway
            .cached_complete(dir.path(), &model, &turns, &warm, None)
            .unwrap();
        assert_eq!(first.content, "a");
        assert_eq!(second.content, "b");
    }

    #[test]
    fn cache_round_trip_preserves_tool_calls_byte_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let turn = ChatTurn::assistant_tool_call(
            "searchPerson",
            BTreeMap::from([
                ("name".to_string(), ArgValue::text("Yann Lecun")),
                ("organization".to_string(), ArgValue::text("New York University")),
            ]),
        );
        write(dir.path(), "k", &turn).unwrap();
        let restored = read(dir.path(), "k").unwrap().unwrap();
        assert_eq!(
            serde_json::to_vec(&turn).unwrap(),
            serde_json::to_vec(&restored).unwrap()
        );
    }

    #[test]
    fn corrupt_entry_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let key = cache_key("m", &[ChatTurn::user("q")], &GenerationParams::default(), None);
        std::fs::create_dir_all(dir.path()).unwrap();
        std::fs::write(entry_path(dir.path(), &key), "garbage").unwrap();
        let err = read(dir.path(), &key).unwrap_err();
        assert!(matches!(err, GatewayError::CacheCorrupt(_)));
    }
}
