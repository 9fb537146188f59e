use std::collections::HashSet;
use std::fmt::{Debug, Display};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{BackendConfig, BackendError, ChatBackend, ChatExchange, ChatRequest, Clock, RequestContext, Usage};
use crate::corpus::SplitMix64;
use crate::prompt::PromptBundle;

/// A prompt to complete, keyed by a unique id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Job {
    pub id: String,
    pub bundle: PromptBundle,
}

/// Result of retrying one job up to the configured patience.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome<T> {
    Success {
        exchange: ChatExchange,
        value: T,
        attempts: u32,
        /// Usage over every attempt, failed ones included.
        usage: Usage,
    },
    Excluded {
        attempts: u32,
        last_error: String,
        usage: Usage,
    },
}

impl<T> Outcome<T> {
    pub fn attempts(&self) -> u32 {
        match self {
            Outcome::Success { attempts, .. } | Outcome::Excluded { attempts, .. } => *attempts,
        }
    }

    pub fn usage(&self) -> Usage {
        match self {
            Outcome::Success { usage, .. } | Outcome::Excluded { usage, .. } => *usage,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JobResult<T> {
    pub id: String,
    /// Position of the job in the submitted list.
    pub index: usize,
    /// Order in which the job finished, starting at 0.
    pub completion_index: usize,
    pub outcome: Outcome<T>,
}

#[derive(Debug, Error)]
pub enum PoolError<T: Debug> {
    #[error("duplicate job id {0:?}")]
    DuplicateJobId(String),
    #[error("cancelled after {} jobs completed", completed.len())]
    Aborted { completed: Vec<JobResult<T>> },
}

struct RateLimiter {
    interval: Duration,
    next: Mutex<Duration>,
}

impl RateLimiter {
    /// Reserves the next dispatch slot and waits for it.
    fn acquire(&self, clock: &dyn Clock) -> Duration {
        let slot = {
            let mut next = self.next.lock().expect("rate limiter lock");
            let slot = clock.now().max(*next);
            *next = slot + self.interval;
            slot
        };
        clock.sleep_until(slot);
        slot
    }
}

/// Applies retry, backoff, rate limiting and concurrency policy on top of a
/// backend.
pub struct Dispatcher<'a> {
    backend: &'a dyn ChatBackend,
    config: BackendConfig,
    clock: &'a dyn Clock,
    limiter: Option<RateLimiter>,
    dispatches: Mutex<Vec<Duration>>,
}

impl<'a> Dispatcher<'a> {
    pub fn new(backend: &'a dyn ChatBackend, config: BackendConfig, clock: &'a dyn Clock) -> Result<Self, BackendError> {
        config.validate()?;
        let limiter = config.requests_per_minute.map(|rpm| RateLimiter {
            interval: Duration::from_secs(60) / rpm,
            next: Mutex::new(Duration::ZERO),
        });
        Ok(Self {
            backend,
            config,
            clock,
            limiter,
            dispatches: Mutex::new(Vec::new()),
        })
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }

    /// Clock readings at which requests were sent, in dispatch order.
    pub fn dispatch_times(&self) -> Vec<Duration> {
        self.dispatches.lock().expect("dispatch log lock").clone()
    }

    /// Sends one request, honouring the rate limit.
    pub fn complete(&self, ctx: &RequestContext, bundle: &PromptBundle) -> Result<ChatExchange, BackendError> {
        let req = ChatRequest::from_bundle(bundle, &self.config);
        let at = match &self.limiter {
            Some(l) => l.acquire(self.clock),
            None => self.clock.now(),
        };
        self.dispatches.lock().expect("dispatch log lock").push(at);
        self.backend.complete(ctx, &req)
    }

    /// Backoff before attempt `attempt + 1`: the base delay scaled by a factor
    /// in [0.5, 1.5) drawn deterministically from the job id and attempt.
    pub fn backoff(&self, job_id: &str, attempt: u32) -> Duration {
        let digest = Sha256::digest(job_id.as_bytes());
        let mut seed = [0u8; 8];
        seed.copy_from_slice(&digest[..8]);
        let mut rng = SplitMix64::new(u64::from_le_bytes(seed) ^ u64::from(attempt));
        let factor = 0.5 + rng.next_f64();
        Duration::from_millis(self.config.retry_base_delay_ms).mul_f64(factor)
    }

    /// Calls the backend until `validate` accepts a completion or patience is
    /// exhausted. Transport errors, API errors and validation failures all
    /// count as failed attempts.
    pub fn complete_with_patience<T, E, F>(&self, index: usize, job: &Job, validate: F) -> Outcome<T>
    where
        E: Display,
        F: Fn(&str) -> Result<T, E>,
    {
        let mut usage = Usage::default();
        let mut last_error = String::new();
        let patience = self.config.patience;
        for attempt in 1..=patience {
            let ctx = RequestContext {
                job_index: index,
                job_id: job.id.clone(),
                attempt,
            };
            let mut wait = None;
            match self.complete(&ctx, &job.bundle) {
                Ok(exchange) => {
                    usage += exchange.usage;
                    match validate(&exchange.response) {
                        Ok(value) => {
                            return Outcome::Success {
                                exchange,
                                value,
                                attempts: attempt,
                                usage,
                            }
                        }
                        Err(e) => last_error = e.to_string(),
                    }
                }
                Err(e) => {
                    if let BackendError::RateLimited { retry_after } = &e {
                        wait = *retry_after;
                    }
                    last_error = e.to_string();
                }
            }
            log::debug!("job {} attempt {attempt}/{patience} failed: {last_error}", job.id);
            if attempt < patience {
                let delay = self.backoff(&job.id, attempt).max(wait.unwrap_or_default());
                self.clock.sleep(delay);
            }
        }
        Outcome::Excluded {
            attempts: patience,
            last_error,
            usage,
        }
    }

    /// Runs every job on at most `max_concurrency` worker threads. Results come
    /// back sorted by job id. Setting `cancel` stops workers from starting new
    /// jobs; jobs already running finish and are returned in the error.
    pub fn run_pool<T, E, F>(
        &self,
        jobs: &[Job],
        validate: F,
        cancel: Option<&AtomicBool>,
    ) -> Result<Vec<JobResult<T>>, PoolError<T>>
    where
        T: Send + Debug,
        E: Display,
        F: Fn(usize, &str) -> Result<T, E> + Sync,
    {
        let mut ids = HashSet::new();
        for job in jobs {
            if !ids.insert(job.id.as_str()) {
                return Err(PoolError::DuplicateJobId(job.id.clone()));
            }
        }
        let next = AtomicUsize::new(0);
        let finished = AtomicUsize::new(0);
        let results = Mutex::new(Vec::with_capacity(jobs.len()));
        let cancelled = || cancel.is_some_and(|c| c.load(Ordering::SeqCst));
        let workers = self.config.max_concurrency.min(jobs.len());

        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    if cancelled() {
                        break;
                    }
                    let index = next.fetch_add(1, Ordering::SeqCst);
                    let Some(job) = jobs.get(index) else { break };
                    let outcome = self.complete_with_patience(index, job, |raw| validate(index, raw));
                    let mut guard = results.lock().expect("results lock");
                    let completion_index = finished.fetch_add(1, Ordering::SeqCst);
                    match &outcome {
                        Outcome::Success { attempts, .. } => log::info!(
                            "[{}/{}] {}: ok after {attempts} attempt(s)",
                            completion_index + 1,
                            jobs.len(),
                            job.id
                        ),
                        Outcome::Excluded { attempts, last_error, .. } => log::warn!(
                            "[{}/{}] {}: excluded after {attempts} attempt(s): {last_error}",
                            completion_index + 1,
                            jobs.len(),
                            job.id
                        ),
                    }
                    guard.push(JobResult {
                        id: job.id.clone(),
                        index,
                        completion_index,
                        outcome,
                    });
                });
            }
        });

        let mut results = results.into_inner().expect("results lock");
        results.sort_by(|a, b| a.id.cmp(&b.id));
        if results.len() < jobs.len() {
            return Err(PoolError::Aborted { completed: results });
        }
        Ok(results)
    }
}
