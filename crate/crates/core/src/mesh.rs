//! Simulated core mesh with `collective_permute` and `all_to_all`.
//!
//! Each logical core runs its SPMD program as a future. A collective posts
//! a request in the core's mailbox and suspends; once every member of the
//! group has posted a matching request the coordinator performs the
//! exchange and resumes them. Cores are polled in rounds on `1..=num_cores`
//! OS threads, and since cores only interact through collectives resolved
//! between rounds, outputs and ledgers do not depend on the worker count.

use std::any::{Any, TypeId};
use std::future::Future;
use std::pin::Pin;
use std::sync::{Arc, Mutex, MutexGuard};
use std::task::{Context, Poll, Waker};

use serde::{Deserialize, Serialize};

use crate::decomposition::ComputationShape;
use crate::error::{Error, Result};
use crate::tensor::{ComplexTensor, PrecisionMode};

/// Data that can travel through a collective.
pub trait Payload: Send + 'static {
    fn shape(&self) -> Vec<usize>;
    fn element_count(&self) -> usize;
}

impl Payload for ComplexTensor {
    fn shape(&self) -> Vec<usize> {
        self.shape().to_vec()
    }

    fn element_count(&self) -> usize {
        self.len()
    }
}

/// A payload carrying the group position it originated from. The tag is
/// bookkeeping for traces and is not counted as moved bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct Tagged<T> {
    pub origin: usize,
    pub value: T,
}

impl<T: Payload> Payload for Tagged<T> {
    fn shape(&self) -> Vec<usize> {
        self.value.shape()
    }

    fn element_count(&self) -> usize {
        self.value.element_count()
    }
}

/// `(source, target)` core pairs of a `collective_permute`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceTargetPairs(Vec<(usize, usize)>);

impl SourceTargetPairs {
    /// Sources must be distinct, and so must targets.
    pub fn new(pairs: Vec<(usize, usize)>) -> Result<Self> {
        let mut sources: Vec<_> = pairs.iter().map(|p| p.0).collect();
        let mut targets: Vec<_> = pairs.iter().map(|p| p.1).collect();
        sources.sort_unstable();
        targets.sort_unstable();
        if sources.windows(2).any(|w| w[0] == w[1]) || targets.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Communication(format!("{pairs:?} repeats a source or target")));
        }
        Ok(SourceTargetPairs(pairs))
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.0
    }

    /// Checks that the pairs permute exactly the cores of `group`.
    pub fn validate_on(&self, group: &[usize]) -> Result<()> {
        let mut members = group.to_vec();
        members.sort_unstable();
        let mut sources: Vec<_> = self.0.iter().map(|p| p.0).collect();
        let mut targets: Vec<_> = self.0.iter().map(|p| p.1).collect();
        sources.sort_unstable();
        targets.sort_unstable();
        if sources != members || targets != members {
            return Err(Error::Communication(format!(
                "pairs {:?} are not a permutation of group {group:?}",
                self.0
            )));
        }
        Ok(())
    }

    /// True when every transfer is between ring neighbours of `group`.
    pub fn is_nearest_neighbor(&self, group: &[usize]) -> bool {
        let n = group.len();
        let pos = |c: usize| group.iter().position(|&g| g == c);
        self.0.iter().all(|&(s, t)| match (pos(s), pos(t)) {
            (Some(a), Some(b)) => {
                let d = a.abs_diff(b);
                d.min(n - d) <= 1
            }
            _ => false,
        })
    }
}

/// One-step cyclic shift `group[i+1] → group[i]`: every core sends to its
/// predecessor and receives from its successor, all in one ring direction.
pub fn ring_pairs(group: &[usize]) -> Result<SourceTargetPairs> {
    if group.is_empty() {
        return Err(Error::Argument("ring of an empty group".into()));
    }
    let n = group.len();
    SourceTargetPairs::new((0..n).map(|i| (group[(i + 1) % n], group[i])).collect())
}

fn check_group(group: &[usize]) -> Result<()> {
    if group.is_empty() {
        return Err(Error::Argument("empty collective group".into()));
    }
    let mut sorted = group.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Argument(format!("group {group:?} repeats a core")));
    }
    Ok(())
}

fn check_same_shapes(shapes: &[Vec<usize>]) -> Result<()> {
    if let Some(first) = shapes.first() {
        if let Some(bad) = shapes.iter().find(|s| *s != first) {
            return Err(Error::Dimension(format!(
                "payload shapes differ within the group: {first:?} vs {bad:?}"
            )));
        }
    }
    Ok(())
}

/// `collective_permute` on host-side data: `payloads[i]` belongs to
/// `group[i]`; each target receives its source's payload.
pub fn permute_payloads<T: Payload>(
    group: &[usize],
    pairs: &SourceTargetPairs,
    payloads: Vec<T>,
) -> Result<Vec<T>> {
    check_group(group)?;
    if payloads.len() != group.len() {
        return Err(Error::Argument(format!(
            "{} payloads for a group of {}",
            payloads.len(),
            group.len()
        )));
    }
    pairs.validate_on(group)?;
    check_same_shapes(&payloads.iter().map(Payload::shape).collect::<Vec<_>>())?;
    let pos = |c: usize| group.iter().position(|&g| g == c).expect("validated");
    let mut slots: Vec<Option<T>> = payloads.into_iter().map(Some).collect();
    let mut out: Vec<Option<T>> = (0..group.len()).map(|_| None).collect();
    for &(s, t) in pairs.pairs() {
        out[pos(t)] = slots[pos(s)].take();
    }
    Ok(out.into_iter().map(|p| p.expect("permutation fills every slot")).collect())
}

/// `all_to_all` on host-side data: every payload is cut into `n` equal
/// chunks along `split_axis`; member `i` receives chunk `i` of every member,
/// concatenated in member order.
pub fn all_to_all_payloads(payloads: Vec<ComplexTensor>, split_axis: usize) -> Result<Vec<ComplexTensor>> {
    let n = payloads.len();
    if n == 0 {
        return Err(Error::Argument("empty collective group".into()));
    }
    check_same_shapes(&payloads.iter().map(|p| p.shape().to_vec()).collect::<Vec<_>>())?;
    let (_, extent, _) = payloads[0].axis_layout(split_axis)?;
    if extent % n != 0 {
        return Err(Error::Dimension(format!(
            "axis extent {extent} is not divisible by group size {n}"
        )));
    }
    let chunk = extent / n;
    let pieces: Vec<Vec<ComplexTensor>> = payloads
        .iter()
        .map(|p| (0..n).map(|i| p.narrow(split_axis, i * chunk, chunk)).collect())
        .collect::<Result<_>>()?;
    (0..n)
        .map(|i| {
            let parts: Vec<_> = pieces.iter().map(|from| from[i].clone()).collect();
            ComplexTensor::concat(&parts, split_axis)
        })
        .collect()
}

/// Deterministic work and communication counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommLedger {
    pub permute_count: u64,
    pub all_to_all_count: u64,
    pub bytes_moved: u64,
    /// Real multiply-accumulates in contractions.
    pub einsum_flops: u64,
    /// `5·M·log2(M)` per local transform of length `M`.
    pub local_fft_flops: u64,
}

impl CommLedger {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ledger serializes")
    }
}

/// A collective as resolved by the coordinator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CollectiveRecord {
    Permute { group: Vec<usize>, pairs: Vec<(usize, usize)>, nearest_neighbor: bool },
    AllToAll { group: Vec<usize>, split_axis: usize },
}

impl CollectiveRecord {
    pub fn group(&self) -> &[usize] {
        match self {
            CollectiveRecord::Permute { group, .. } | CollectiveRecord::AllToAll { group, .. } => group,
        }
    }
}

/// What a core did, in its own program order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoreEvent {
    /// A contraction with column block `slice_idx` of the core's slice
    /// against the block that originated at group position `operand_origin`.
    Contract { slice_idx: usize, operand_origin: usize },
    /// Participation in `MeshSim::collectives()[record]`.
    Collective { record: usize },
}

#[derive(Debug, Clone, PartialEq)]
enum RequestKind {
    Permute(SourceTargetPairs),
    AllToAll { split_axis: usize },
}

struct Request {
    kind: RequestKind,
    group: Vec<usize>,
    payload: Box<dyn Any + Send>,
    type_id: TypeId,
    shape: Vec<usize>,
    elements: usize,
}

#[derive(Default)]
struct Mailbox {
    request: Option<Request>,
    response: Option<Box<dyn Any + Send>>,
    events: Vec<CoreEvent>,
    einsum_flops: u64,
    local_fft_flops: u64,
}

struct Shared {
    mailboxes: Vec<Mutex<Mailbox>>,
}

impl Shared {
    fn mailbox(&self, core: usize) -> MutexGuard<'_, Mailbox> {
        self.mailboxes[core].lock().expect("mailbox lock poisoned")
    }
}

/// Handle a core's program uses to talk to the mesh.
#[derive(Clone)]
pub struct CoreCtx {
    core: usize,
    shape: ComputationShape,
    precision: PrecisionMode,
    shared: Arc<Shared>,
}

impl CoreCtx {
    pub fn core_id(&self) -> usize {
        self.core
    }

    pub fn coord(&self) -> [usize; 3] {
        self.shape.coord_of(self.core)
    }

    pub fn computation_shape(&self) -> ComputationShape {
        self.shape
    }

    pub fn precision(&self) -> PrecisionMode {
        self.precision
    }

    /// This core's line of the grid along `dim`.
    pub fn line(&self, dim: usize) -> Vec<usize> {
        self.shape.line(dim, self.core)
    }

    pub fn record_einsum(&self, flops: u64) {
        self.shared.mailbox(self.core).einsum_flops += flops;
    }

    pub fn record_local_fft(&self, flops: u64) {
        self.shared.mailbox(self.core).local_fft_flops += flops;
    }

    pub fn record_event(&self, event: CoreEvent) {
        self.shared.mailbox(self.core).events.push(event);
    }

    pub async fn collective_permute<T: Payload>(
        &self,
        group: &[usize],
        pairs: &SourceTargetPairs,
        payload: T,
    ) -> Result<T> {
        self.exchange(RequestKind::Permute(pairs.clone()), group, payload).await
    }

    pub async fn all_to_all(
        &self,
        group: &[usize],
        payload: ComplexTensor,
        split_axis: usize,
    ) -> Result<ComplexTensor> {
        self.exchange(RequestKind::AllToAll { split_axis }, group, payload).await
    }

    async fn exchange<T: Payload>(&self, kind: RequestKind, group: &[usize], payload: T) -> Result<T> {
        if !group.contains(&self.core) {
            return Err(Error::Protocol(format!(
                "core {} issued a collective on group {group:?} it is not part of",
                self.core
            )));
        }
        {
            let mut mb = self.shared.mailbox(self.core);
            mb.request = Some(Request {
                kind,
                group: group.to_vec(),
                shape: payload.shape(),
                elements: payload.element_count(),
                type_id: TypeId::of::<T>(),
                payload: Box::new(payload),
            });
        }
        let reply = AwaitReply { shared: &self.shared, core: self.core }.await;
        Ok(*reply.downcast::<T>().expect("payload types checked at resolution"))
    }
}

struct AwaitReply<'a> {
    shared: &'a Shared,
    core: usize,
}

impl Future for AwaitReply<'_> {
    type Output = Box<dyn Any + Send>;

    fn poll(self: Pin<&mut Self>, _cx: &mut Context<'_>) -> Poll<Self::Output> {
        match self.shared.mailbox(self.core).response.take() {
            Some(r) => Poll::Ready(r),
            None => Poll::Pending,
        }
    }
}

type CoreFuture<'a, T> = Pin<Box<dyn Future<Output = Result<T>> + Send + 'a>>;

/// The simulated mesh: grid, precision (for byte accounting), worker count,
/// and the cumulative ledger and traces of every program run on it.
#[derive(Debug, Clone)]
pub struct MeshSim {
    shape: ComputationShape,
    precision: PrecisionMode,
    workers: usize,
    ledger: CommLedger,
    collectives: Vec<CollectiveRecord>,
    core_events: Vec<Vec<CoreEvent>>,
    core_einsum_flops: Vec<u64>,
    core_local_fft_flops: Vec<u64>,
}

impl MeshSim {
    pub fn new(shape: ComputationShape, precision: PrecisionMode) -> Self {
        let n = shape.num_cores();
        MeshSim {
            shape,
            precision,
            workers: 1,
            ledger: CommLedger::default(),
            collectives: Vec::new(),
            core_events: vec![Vec::new(); n],
            core_einsum_flops: vec![0; n],
            core_local_fft_flops: vec![0; n],
        }
    }

    /// Physical worker threads, clamped to `1..=num_cores`.
    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.clamp(1, self.num_cores());
        self
    }

    pub fn num_cores(&self) -> usize {
        self.shape.num_cores()
    }

    pub fn computation_shape(&self) -> ComputationShape {
        self.shape
    }

    pub fn precision(&self) -> PrecisionMode {
        self.precision
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn ledger(&self) -> &CommLedger {
        &self.ledger
    }

    pub fn collectives(&self) -> &[CollectiveRecord] {
        &self.collectives
    }

    pub fn core_events(&self, core: usize) -> &[CoreEvent] {
        &self.core_events[core]
    }

    pub fn core_einsum_flops(&self) -> &[u64] {
        &self.core_einsum_flops
    }

    pub fn core_local_fft_flops(&self) -> &[u64] {
        &self.core_local_fft_flops
    }

    /// Number of recorded permutes issued on exactly this group.
    pub fn permutes_on(&self, group: &[usize]) -> usize {
        self.collectives
            .iter()
            .filter(|r| matches!(r, CollectiveRecord::Permute { .. }) && r.group() == group)
            .count()
    }

    pub fn all_to_alls_on(&self, group: &[usize]) -> usize {
        self.collectives
            .iter()
            .filter(|r| matches!(r, CollectiveRecord::AllToAll { .. }) && r.group() == group)
            .count()
    }

    /// Runs `program` on every core with its own input and returns the
    /// per-core results in core order.
    pub fn run_spmd<'a, S, T, F, Fut>(&mut self, inputs: Vec<S>, program: F) -> Result<Vec<T>>
    where
        S: Send,
        T: Send + 'a,
        F: Fn(CoreCtx, S) -> Fut,
        Fut: Future<Output = Result<T>> + Send + 'a,
    {
        let n = self.num_cores();
        if inputs.len() != n {
            return Err(Error::Argument(format!("{} inputs for {n} cores", inputs.len())));
        }
        let shared = Arc::new(Shared { mailboxes: (0..n).map(|_| Mutex::new(Mailbox::default())).collect() });
        let mut futures: Vec<Option<CoreFuture<'a, T>>> = inputs
            .into_iter()
            .enumerate()
            .map(|(core, input)| {
                let ctx = CoreCtx { core, shape: self.shape, precision: self.precision, shared: shared.clone() };
                Some(Box::pin(program(ctx, input)) as CoreFuture<'a, T>)
            })
            .collect();
        let mut results: Vec<Option<T>> = (0..n).map(|_| None).collect();
        let mut runnable: Vec<bool> = vec![true; n];

        let outcome = loop {
            let outcomes = self.poll_round(&mut futures, &runnable);
            runnable.iter_mut().for_each(|r| *r = false);
            let mut first_err = None;
            for (core, out) in outcomes {
                match out {
                    Poll::Ready(Ok(v)) => {
                        results[core] = Some(v);
                        futures[core] = None;
                    }
                    Poll::Ready(Err(e)) => {
                        futures[core] = None;
                        first_err.get_or_insert(e);
                    }
                    Poll::Pending => {
                        if shared.mailbox(core).request.is_none() {
                            first_err.get_or_insert(Error::Protocol(format!(
                                "core {core} suspended outside a mesh collective"
                            )));
                        }
                    }
                }
            }
            if let Some(e) = first_err {
                break Err(e);
            }
            if futures.iter().all(Option::is_none) {
                break Ok(());
            }
            match self.resolve(&shared, &futures) {
                Ok(woken) if woken.is_empty() => {
                    let waiting: Vec<usize> = (0..n).filter(|&c| futures[c].is_some()).collect();
                    break Err(Error::Protocol(format!(
                        "deadlock: cores {waiting:?} wait on collectives that can never complete"
                    )));
                }
                Ok(woken) => woken.into_iter().for_each(|c| runnable[c] = true),
                Err(e) => break Err(e),
            }
        };
        drop(futures);

        for core in 0..n {
            let mut mb = shared.mailbox(core);
            self.core_einsum_flops[core] += mb.einsum_flops;
            self.core_local_fft_flops[core] += mb.local_fft_flops;
            self.ledger.einsum_flops += mb.einsum_flops;
            self.ledger.local_fft_flops += mb.local_fft_flops;
            self.core_events[core].append(&mut mb.events);
        }
        outcome?;
        Ok(results.into_iter().map(|r| r.expect("every core finished")).collect())
    }

    /// Polls each runnable core once, spread over the worker threads.
    fn poll_round<'a, T: Send>(
        &self,
        futures: &mut [Option<CoreFuture<'a, T>>],
        runnable: &[bool],
    ) -> Vec<(usize, Poll<Result<T>>)> {
        let mut ready: Vec<(usize, &mut CoreFuture<'a, T>)> = futures
            .iter_mut()
            .enumerate()
            .filter(|(c, _)| runnable[*c])
            .filter_map(|(c, f)| f.as_mut().map(|f| (c, f)))
            .collect();
        let poll_one = |(core, fut): &mut (usize, &mut CoreFuture<'a, T>)| {
            let mut cx = Context::from_waker(Waker::noop());
            (*core, fut.as_mut().poll(&mut cx))
        };
        if self.workers <= 1 || ready.len() <= 1 {
            return ready.iter_mut().map(poll_one).collect();
        }
        let chunk = ready.len().div_ceil(self.workers);
        let mut out: Vec<(usize, Poll<Result<T>>)> = std::thread::scope(|s| {
            let handles: Vec<_> = ready
                .chunks_mut(chunk)
                .map(|part| s.spawn(move || part.iter_mut().map(poll_one).collect::<Vec<_>>()))
                .collect();
            handles.into_iter().flat_map(|h| h.join().expect("core worker panicked")).collect()
        });
        out.sort_by_key(|(c, _)| *c);
        out
    }

    /// Completes every collective whose group has fully arrived. Returns the
    /// cores to resume, or a protocol error on mismatched requests.
    fn resolve<T>(&mut self, shared: &Shared, futures: &[Option<CoreFuture<'_, T>>]) -> Result<Vec<usize>> {
        let n = self.num_cores();
        let mut woken = Vec::new();
        let mut handled = vec![false; n];
        for core in 0..n {
            if handled[core] || futures[core].is_none() {
                continue;
            }
            let group = match &shared.mailbox(core).request {
                Some(r) => r.group.clone(),
                None => continue,
            };
            check_group(&group).map_err(|e| Error::Protocol(e.to_string()))?;
            if let Some(&bad) = group.iter().find(|&&m| m >= n) {
                return Err(Error::Protocol(format!("group {group:?} names core {bad} outside the mesh")));
            }
            // Every member must be alive and waiting, else try again later.
            let arrived = group.iter().all(|&m| futures[m].is_some() && shared.mailbox(m).request.is_some());
            if !arrived {
                continue;
            }
            let requests: Vec<Request> = group
                .iter()
                .map(|&m| shared.mailbox(m).request.take().expect("checked"))
                .collect();
            for &m in &group {
                handled[m] = true;
            }
            let lead = &requests[0];
            for (m, r) in group.iter().zip(&requests) {
                if r.group != lead.group || r.kind != lead.kind || r.type_id != lead.type_id {
                    return Err(Error::Protocol(format!(
                        "core {m} issued {:?} on {:?} while core {} issued {:?} on {:?}",
                        r.kind, r.group, group[0], lead.kind, lead.group
                    )));
                }
            }
            let shapes: Vec<_> = requests.iter().map(|r| r.shape.clone()).collect();
            check_same_shapes(&shapes)?;
            let payload_bytes = lead.elements as u64 * self.precision.complex_bytes();
            let kind = lead.kind.clone();
            let payloads: Vec<Box<dyn Any + Send>> = requests.into_iter().map(|r| r.payload).collect();

            let (replies, record) = match kind {
                RequestKind::Permute(pairs) => {
                    let replies = permute_payloads(&group, &pairs, payloads.into_iter().map(AnyPayload).collect())?;
                    self.ledger.permute_count += 1;
                    let record = CollectiveRecord::Permute {
                        nearest_neighbor: pairs.is_nearest_neighbor(&group),
                        group: group.clone(),
                        pairs: pairs.pairs().to_vec(),
                    };
                    (replies.into_iter().map(|p| p.0).collect::<Vec<_>>(), record)
                }
                RequestKind::AllToAll { split_axis } => {
                    let tensors = payloads
                        .into_iter()
                        .map(|p| *p.downcast::<ComplexTensor>().expect("all_to_all carries tensors"))
                        .collect();
                    let replies = all_to_all_payloads(tensors, split_axis)?;
                    self.ledger.all_to_all_count += 1;
                    let record = CollectiveRecord::AllToAll { group: group.clone(), split_axis };
                    (replies.into_iter().map(|t| Box::new(t) as Box<dyn Any + Send>).collect(), record)
                }
            };
            self.ledger.bytes_moved += group.len() as u64 * payload_bytes;
            let index = self.collectives.len();
            self.collectives.push(record);
            for (&m, reply) in group.iter().zip(replies) {
                let mut mb = shared.mailbox(m);
                mb.response = Some(reply);
                mb.events.push(CoreEvent::Collective { record: index });
                woken.push(m);
            }
        }
        woken.sort_unstable();
        Ok(woken)
    }
}

/// Type-erased payload for routing inside the coordinator; shapes were
/// already checked on the typed requests.
struct AnyPayload(Box<dyn Any + Send>);

impl Payload for AnyPayload {
    fn shape(&self) -> Vec<usize> {
        Vec::new()
    }

    fn element_count(&self) -> usize {
        0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn vec_tensor(values: &[f64]) -> ComplexTensor {
        let v: Vec<_> = values.iter().map(|&r| Complex64::new(r, 0.0)).collect();
        ComplexTensor::from_complex(vec![v.len()], &v).unwrap()
    }

    fn line_mesh(n: usize) -> MeshSim {
        MeshSim::new(ComputationShape::new(n, 1, 1).unwrap(), PrecisionMode::F64Reference)
    }

    #[test]
    fn ring_pairs_examples() {
        assert_eq!(ring_pairs(&[0, 1, 2]).unwrap().pairs(), &[(1, 0), (2, 1), (0, 2)]);
        assert_eq!(ring_pairs(&[0]).unwrap().pairs(), &[(0, 0)]);
        assert!(ring_pairs(&[]).is_err());
    }

    #[test]
    fn ring_shift_composes_to_identity() {
        let group = [0, 1, 2, 3];
        let pairs = ring_pairs(&group).unwrap();
        let start = [10usize, 11, 12, 13];
        let tagged: Vec<_> = start
            .iter()
            .map(|&t| Tagged { origin: t, value: vec_tensor(&[t as f64]) })
            .collect();
        let mut cur = tagged.clone();
        for step in 1..=4 {
            cur = permute_payloads(&group, &pairs, cur).unwrap();
            let origins: Vec<_> = cur.iter().map(|p| p.origin).collect();
            let want: Vec<_> = (0..4).map(|i| start[(i + step) % 4]).collect();
            assert_eq!(origins, want);
        }
        assert_eq!(cur, tagged);
    }

    #[test]
    fn permute_rejects_bad_pairs_and_shapes() {
        assert!(SourceTargetPairs::new(vec![(0, 1), (0, 2)]).is_err());
        let pairs = SourceTargetPairs::new(vec![(0, 1), (1, 3)]).unwrap();
        let p = vec![vec_tensor(&[1.0]), vec_tensor(&[2.0])];
        assert!(matches!(permute_payloads(&[0, 1], &pairs, p), Err(Error::Communication(_))));
        let swap = ring_pairs(&[0, 1]).unwrap();
        let mixed = vec![vec_tensor(&[1.0]), vec_tensor(&[2.0, 3.0])];
        assert!(matches!(permute_payloads(&[0, 1], &swap, mixed), Err(Error::Dimension(_))));
    }

    #[test]
    fn all_to_all_transposes_chunks() {
        let a = vec_tensor(&[0.0, 1.0]);
        let b = vec_tensor(&[10.0, 11.0]);
        let out = all_to_all_payloads(vec![a.clone(), b.clone()], 0).unwrap();
        assert_eq!(out[0], vec_tensor(&[0.0, 10.0]));
        assert_eq!(out[1], vec_tensor(&[1.0, 11.0]));
        assert_eq!(all_to_all_payloads(vec![a.clone()], 0).unwrap(), vec![a]);
        let odd = vec_tensor(&[1.0, 2.0, 3.0]);
        assert!(matches!(
            all_to_all_payloads(vec![odd.clone(), odd], 0),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn all_to_all_twice_restores_equal_chunks() {
        // Chunk j of member i goes to member j at slot i, and back again.
        let orig: Vec<_> = (0..4)
            .map(|m| vec_tensor(&(0..8).map(|e| (m * 8 + e) as f64).collect::<Vec<_>>()))
            .collect();
        let once = all_to_all_payloads(orig.clone(), 0).unwrap();
        assert_eq!(once[1].re(), &[2.0, 3.0, 10.0, 11.0, 18.0, 19.0, 26.0, 27.0]);
        assert_eq!(all_to_all_payloads(once, 0).unwrap(), orig);
    }

    #[test]
    fn spmd_without_collectives_is_a_map() {
        let mut mesh = line_mesh(4);
        let out = mesh
            .run_spmd(vec![1, 2, 3, 4], |ctx, x: i32| async move { Ok(x * 10 + ctx.core_id() as i32) })
            .unwrap();
        assert_eq!(out, vec![10, 21, 32, 43]);
        assert_eq!(*mesh.ledger(), CommLedger::default());
    }

    #[test]
    fn spmd_ring_permute_matches_caption_pairs() {
        for workers in [1, 2, 3] {
            let mut mesh = line_mesh(3).with_workers(workers);
            let inputs = vec![vec_tensor(&[0.0]), vec_tensor(&[1.0]), vec_tensor(&[2.0])];
            let out = mesh
                .run_spmd(inputs, |ctx, x| async move {
                    let group = ctx.line(0);
                    let pairs = ring_pairs(&group)?;
                    ctx.collective_permute(&group, &pairs, x).await
                })
                .unwrap();
            assert_eq!(out, vec![vec_tensor(&[1.0]), vec_tensor(&[2.0]), vec_tensor(&[0.0])]);
            assert_eq!(mesh.ledger().permute_count, 1);
            assert_eq!(mesh.ledger().bytes_moved, 3 * 16);
            assert_eq!(
                mesh.collectives()[0],
                CollectiveRecord::Permute {
                    group: vec![0, 1, 2],
                    pairs: vec![(1, 0), (2, 1), (0, 2)],
                    nearest_neighbor: true
                }
            );
        }
    }

    #[test]
    fn three_cycle_restores_after_three_steps() {
        let mut mesh = line_mesh(3);
        let inputs = vec![vec_tensor(&[5.0]), vec_tensor(&[6.0]), vec_tensor(&[7.0])];
        let out = mesh
            .run_spmd(inputs.clone(), |ctx, mut x| async move {
                let group = ctx.line(0);
                let pairs = ring_pairs(&group)?;
                for _ in 0..3 {
                    x = ctx.collective_permute(&group, &pairs, x).await?;
                }
                Ok(x)
            })
            .unwrap();
        assert_eq!(out, inputs);
        assert_eq!(mesh.ledger().permute_count, 3);
    }

    #[test]
    fn independent_lines_resolve_separately() {
        let shape = ComputationShape::new(2, 2, 1).unwrap();
        let mut mesh = MeshSim::new(shape, PrecisionMode::F32).with_workers(4);
        let inputs: Vec<_> = (0..4).map(|c| vec_tensor(&[c as f64, 0.0])).collect();
        let out = mesh
            .run_spmd(inputs, |ctx, x| async move {
                let group = ctx.line(1);
                ctx.all_to_all(&group, x, 0).await
            })
            .unwrap();
        assert_eq!(out[0], vec_tensor(&[0.0, 1.0]));
        assert_eq!(out[1], vec_tensor(&[0.0, 0.0]));
        assert_eq!(out[2], vec_tensor(&[2.0, 3.0]));
        assert_eq!(mesh.ledger().all_to_all_count, 2);
        assert_eq!(mesh.ledger().bytes_moved, 2 * 2 * 2 * 8);
        assert_eq!(mesh.all_to_alls_on(&[0, 1]), 1);
    }

    #[test]
    fn mismatched_collectives_are_protocol_errors() {
        let mut mesh = line_mesh(2);
        let inputs = vec![vec_tensor(&[1.0, 2.0]), vec_tensor(&[3.0, 4.0])];
        let err = mesh
            .run_spmd(inputs, |ctx, x| async move {
                let group = ctx.line(0);
                if ctx.core_id() == 0 {
                    ctx.collective_permute(&group, &ring_pairs(&group)?, x).await
                } else {
                    ctx.all_to_all(&group, x, 0).await
                }
            })
            .unwrap_err();
        assert!(matches!(err, Error::Protocol(_)), "{err}");
    }

    #[test]
    fn missing_collective_is_a_deadlock() {
        let mut mesh = line_mesh(2);
        let inputs = vec![vec_tensor(&[1.0]), vec_tensor(&[2.0])];
        let err = mesh
            .run_spmd(inputs, |ctx, x| async move {
                let group = ctx.line(0);
                if ctx.core_id() == 0 {
                    return ctx.collective_permute(&group, &ring_pairs(&group)?, x).await;
                }
                Ok(x)
            })
            .unwrap_err();
        assert!(matches!(err, Error::Protocol(ref m) if m.contains("deadlock")), "{err}");
    }

    #[test]
    fn core_errors_propagate() {
        let mut mesh = line_mesh(2);
        let err = mesh
            .run_spmd(vec![0, 1], |ctx, _x: i32| async move {
                if ctx.core_id() == 1 {
                    return Err(Error::Argument("boom".into()));
                }
                Ok(())
            })
            .unwrap_err();
        assert_eq!(err, Error::Argument("boom".into()));
    }

    #[test]
    fn ledger_json_field_names() {
        let v: serde_json::Value = serde_json::from_str(&CommLedger::default().to_json()).unwrap();
        for key in ["permute_count", "all_to_all_count", "bytes_moved", "einsum_flops", "local_fft_flops"] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }
}
