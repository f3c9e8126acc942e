//! Circular data-pool views. Each referenced input type gets a pool; a
//! pool of N items presents N distinct views, each a rotation of the item
//! list, and advancing N times returns to the original ordering.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::TargetConfig;
use crate::error::ProviderError;
use crate::exec::value::Value;
use crate::pool::DataPool;

/// The fixed pool behind `HttpMethod()`.
pub const HTTP_METHODS: &[&str] = &["GET", "POST", "PUT", "DELETE", "HEAD", "OPTIONS", "PATCH"];

#[derive(Debug, Clone)]
struct Pool {
    items: Vec<Value>,
    taken: usize,
    offset: usize,
}

/// Pools and rotation state for one relation run series.
#[derive(Debug, Clone)]
pub struct DataProvider {
    pools: BTreeMap<String, Pool>,
}

impl DataProvider {
    /// Builds pools for exactly the requested input types.
    /// `types` maps type name → highest index the relation dereferences;
    /// pools must be able to serve that index from every view. Random
    /// pools (`RandomFilePath`, `RandomValue`) are seeded from `seed` and
    /// present `config.paths.views` views.
    pub fn build(
        data: &DataPool,
        config: &TargetConfig,
        types: &BTreeMap<String, usize>,
        seed: u64,
    ) -> Result<Self, ProviderError> {
        let mut pools = BTreeMap::new();
        for (name, &max_index) in types {
            let items = match name.as_str() {
                "Input" => data
                    .sequences
                    .iter()
                    .cloned()
                    .map(Value::Input)
                    .collect::<Vec<_>>(),
                "User" => data.users.iter().cloned().map(Value::User).collect(),
                "Session" => data.sessions().into_iter().map(Value::Session).collect(),
                "Action" => data
                    .sequences
                    .iter()
                    .flat_map(|s| s.actions.iter())
                    .enumerate()
                    .map(|(i, a)| {
                        Value::Action(crate::exec::value::ActionView {
                            action: a.clone(),
                            position: i + 1,
                            after_login: false,
                        })
                    })
                    .collect(),
                "HttpMethod" => HTTP_METHODS
                    .iter()
                    .map(|m| Value::Str(m.to_string()))
                    .collect(),
                "RandomFilePath" => {
                    let corpus = config
                        .paths
                        .resolve(std::path::Path::new("."))
                        .map_err(|_| ProviderError::EmptyPool {
                            ty: name.to_string(),
                        })?;
                    if corpus.is_empty() {
                        return Err(ProviderError::EmptyPool {
                            ty: name.to_string(),
                        });
                    }
                    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x66696c65);
                    (0..config.paths.views)
                        .map(|_| Value::Str(corpus[rng.gen_range(0..corpus.len())].clone()))
                        .collect()
                }
                "RandomValue" => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x76616c75);
                    (0..config.paths.views)
                        .map(|_| Value::Int(rng.gen::<u32>() as i64))
                        .collect()
                }
                other => return Err(ProviderError::UnknownType(other.to_string())),
            };
            if items.is_empty() {
                return Err(ProviderError::EmptyPool {
                    ty: name.to_string(),
                });
            }
            if max_index > items.len() {
                return Err(ProviderError::IndexOutOfRange {
                    ty: name.to_string(),
                    index: max_index as u32,
                    len: items.len(),
                });
            }
            pools.insert(
                name.clone(),
                Pool {
                    items,
                    taken: 0,
                    offset: 0,
                },
            );
        }
        Ok(DataProvider { pools })
    }

    fn pool(&self, ty: &str) -> Result<&Pool, ProviderError> {
        self.pools
            .get(ty)
            .ok_or_else(|| ProviderError::UnknownType(ty.to_string()))
    }

    /// True until the pool has presented each of its views once.
    pub fn has_more_views(&self, ty: &str) -> Result<bool, ProviderError> {
        let pool = self.pool(ty)?;
        Ok(pool.taken < pool.items.len())
    }

    /// Rotates the pool to its next view.
    pub fn next_view(&mut self, ty: &str) -> Result<(), ProviderError> {
        let pool = self
            .pools
            .get_mut(ty)
            .ok_or_else(|| ProviderError::UnknownType(ty.to_string()))?;
        pool.taken += 1;
        pool.offset = pool.taken % pool.items.len();
        Ok(())
    }

    /// Returns the pool to its original ordering so an enclosing type can
    /// iterate it again.
    pub fn reset_views(&mut self, ty: &str) -> Result<(), ProviderError> {
        let pool = self
            .pools
            .get_mut(ty)
            .ok_or_else(|| ProviderError::UnknownType(ty.to_string()))?;
        pool.taken = 0;
        pool.offset = 0;
        Ok(())
    }

    /// The item at 1-based `index` of the current view of `ty`.
    pub fn view_item(&self, ty: &str, index: usize) -> Result<Value, ProviderError> {
        let pool = self.pool(ty)?;
        if index == 0 || index > pool.items.len() {
            return Err(ProviderError::IndexOutOfRange {
                ty: ty.to_string(),
                index: index as u32,
                len: pool.items.len(),
            });
        }
        Ok(pool.items[(pool.offset + index - 1) % pool.items.len()].clone())
    }

    /// Current rotation offset per type, recorded into failure contexts.
    pub fn view_offsets(&self) -> BTreeMap<String, usize> {
        self.pools
            .iter()
            .map(|(name, pool)| (name.clone(), pool.offset))
            .collect()
    }

    /// The seed material contributed by the current `RandomValue` view,
    /// if that pool exists: its first item.
    pub fn random_value_seed(&self) -> Option<u64> {
        let pool = self.pools.get("RandomValue")?;
        match pool.items[pool.offset % pool.items.len()] {
            Value::Int(n) => Some(n as u64),
            _ => None,
        }
    }

    /// Registered type names, in iteration (lexicographic) order.
    pub fn type_names(&self) -> Vec<String> {
        self.pools.keys().cloned().collect()
    }
}
