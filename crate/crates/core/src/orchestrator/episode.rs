use std::collections::BTreeSet;

use crate::env::{ActionClass, EnvSession, Environment, Feedback, NOTHING_HAPPENS};
use crate::kg::{self, EntityId, KnowledgeTriplet, RetrievalConfig};
use crate::llm::{fingerprint, CompletionRequest, RoleClient, TokenUsage};

use super::prompt::{render_prompt, History, PromptContext, PromptSet, PromptTemplate};
use super::{
    Agents, EpisodeOptions, EpisodeResult, Method, OrchestratorError, Phase, PhaseBudget, Plan,
    StepRecord, TerminatedBy, Trajectory, DONE_EXPLORING, THOUGHT_PREFIX,
};

const THOUGHT_ACK: &str = "OK.";

#[derive(Debug)]
pub struct ExploreOutcome {
    /// The knowledge set, in first-seen order without duplicates.
    pub triplets: Vec<KnowledgeTriplet>,
    pub trajectory: Trajectory,
    pub error: Option<OrchestratorError>,
}

#[derive(Debug)]
pub struct ExploitOutcome {
    pub plan: Plan,
    pub trajectory: Trajectory,
    pub success: bool,
    pub error: Option<OrchestratorError>,
}

fn action_line(text: &str) -> String {
    let line = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .unwrap_or("");
    line.trim_start_matches('>').trim().to_string()
}

fn templates_for(env: &dyn Environment, class: ActionClass) -> Vec<String> {
    env.action_templates()
        .into_iter()
        .filter(|(v, _)| env.partition().allows(*v, class))
        .map(|(_, t)| t.to_string())
        .collect()
}

fn call(
    client: &RoleClient,
    prompt: String,
    max_tokens: u32,
    stop: &[String],
    phase: Phase,
) -> Result<(String, TokenUsage), OrchestratorError> {
    let mut request = CompletionRequest::new(prompt, max_tokens)
        .map_err(|source| OrchestratorError::Backend { phase, source })?;
    request.stop = stop.to_vec();
    let result = client
        .complete(&request)
        .map_err(|source| OrchestratorError::Backend { phase, source })?;
    Ok((result.text, result.usage))
}

/// Turns one feedback text into triplets. Empty feedback costs no call.
pub fn extract_triplets(
    feedback: &str,
    extractor: &RoleClient,
    prompts: &PromptSet,
    opts: &EpisodeOptions,
) -> Result<(Vec<KnowledgeTriplet>, TokenUsage), OrchestratorError> {
    if feedback.trim().is_empty() {
        return Ok((Vec::new(), TokenUsage::default()));
    }
    let prompt = render_prompt(
        &prompts.extract,
        &PromptContext {
            observation: feedback,
            ..Default::default()
        },
    )?;
    let (text, usage) = call(extractor, prompt, opts.extract_max_tokens, &[], Phase::Explore)?;
    let parsed = kg::parse_triplets(&text);
    if parsed.skipped > 0 {
        tracing::debug!(skipped = parsed.skipped, "extractor lines skipped");
    }
    Ok((parsed.triplets, usage))
}

/// Asks for the task's entities and keeps only those present in the graph.
pub fn extract_task_entities(
    graph_entities: &BTreeSet<EntityId>,
    task: &str,
    extractor: &RoleClient,
    prompts: &PromptSet,
    opts: &EpisodeOptions,
) -> Result<(BTreeSet<EntityId>, TokenUsage), OrchestratorError> {
    let inventory: Vec<String> = graph_entities.iter().map(|e| e.as_str().to_string()).collect();
    let prompt = render_prompt(
        &prompts.entities,
        &PromptContext {
            task,
            entities: &inventory,
            ..Default::default()
        },
    )?;
    let (text, usage) = call(extractor, prompt, opts.extract_max_tokens, &[], Phase::Explore)?;
    let mut found = BTreeSet::new();
    for raw in text.split([',', '\n']) {
        let Ok(id) = EntityId::new(raw) else { continue };
        if graph_entities.contains(&id) {
            found.insert(id);
        } else {
            tracing::debug!(entity = id.as_str(), "dropping entity absent from the graph");
        }
    }
    Ok((found, usage))
}

fn step_env(
    session: &mut Box<dyn EnvSession>,
    action: Option<&str>,
    phase: Phase,
) -> Result<Feedback, OrchestratorError> {
    match action {
        Some(a) => session
            .step(a)
            .map_err(|source| OrchestratorError::Env { phase, source }),
        None => Ok(Feedback::observe(NOTHING_HAPPENS)),
    }
}

/// Weak exploration: observation actions only, one extraction per step.
pub fn explore_phase(
    env: &dyn Environment,
    task_id: &str,
    agents: &Agents,
    prompts: &PromptSet,
    n_explore: usize,
    opts: &EpisodeOptions,
) -> ExploreOutcome {
    let mut trajectory = Trajectory::new(Phase::Explore);
    let mut triplets = Vec::new();
    let mut seen = BTreeSet::new();
    let mut error = None;
    let result = (|| -> Result<(), OrchestratorError> {
        let task = env
            .task(task_id)
            .ok_or_else(|| OrchestratorError::Config(format!("unknown task {task_id:?}")))?;
        let (mut session, initial) = env
            .reset(task_id)
            .map_err(|source| OrchestratorError::Env { phase: Phase::Explore, source })?;
        let mut history = History::new(&initial.text);
        let actions = templates_for(env, ActionClass::Exploration);
        let stop = env.stop_sequences();
        let mut feedback_seen = BTreeSet::new();
        while trajectory.steps.len() < n_explore {
            let prompt = render_prompt(
                &prompts.explore,
                &PromptContext {
                    task: &task.description,
                    history: Some(&history),
                    actions: &actions,
                    window_tokens: opts.history_window_tokens,
                    keep_recent: opts.keep_recent,
                    ..Default::default()
                },
            )?;
            let (text, usage) = call(&agents.explorer, prompt, opts.action_max_tokens, &stop, Phase::Explore)?;
            trajectory.backend_calls += 1;
            let line = action_line(&text);
            if line.contains(DONE_EXPLORING) {
                trajectory.trailing_usage = usage;
                trajectory.terminated_by = TerminatedBy::AgentTerminate;
                return Ok(());
            }
            let (action, raw, execute) = if env.admits(&line, ActionClass::Exploration) {
                (line.clone(), None, true)
            } else {
                tracing::warn!(output = %line, "unusable exploration action");
                match env.noop_action() {
                    Some(noop) => (noop.to_string(), Some(line.clone()), true),
                    None => (line.clone(), Some(line.clone()), false),
                }
            };
            let fb = step_env(&mut session, execute.then_some(action.as_str()), Phase::Explore)?;
            let skip = opts.dedup_extraction && !feedback_seen.insert(fb.text.clone());
            let (extracted, extraction_usage) = if skip {
                (Vec::new(), TokenUsage::default())
            } else {
                extract_triplets(&fb.text, &agents.extractor, prompts, opts)?
            };
            for t in &extracted {
                if t.is_self_loop() {
                    tracing::debug!(triplet = %t, "self-loop extracted");
                }
                if seen.insert(t.clone()) {
                    triplets.push(t.clone());
                }
            }
            history.push(&action, &fb.text);
            trajectory.steps.push(StepRecord {
                index: trajectory.steps.len(),
                action,
                raw,
                feedback: fb.text.clone(),
                state: fingerprint(&session.state_json()),
                reward: fb.reward,
                usage,
                thoughts: Vec::new(),
                extracted,
                extraction_usage,
            });
            if fb.done || session.is_done() {
                trajectory.terminated_by = TerminatedBy::EnvComplete;
                return Ok(());
            }
        }
        trajectory.terminated_by = TerminatedBy::Budget;
        Ok(())
    })();
    if let Err(e) = result {
        trajectory.terminated_by = TerminatedBy::Error;
        error = Some(e);
    }
    ExploreOutcome {
        triplets,
        trajectory,
        error,
    }
}

/// Strong exploitation from a fresh reset with `retrieved` in the prompt.
/// With `thought_mode`, lines starting with `think:` cost a call but no step.
#[allow(clippy::too_many_arguments)]
pub fn exploit_phase(
    env: &dyn Environment,
    task_id: &str,
    exploiter: &RoleClient,
    template: &PromptTemplate,
    retrieved: &[KnowledgeTriplet],
    n_exploit: usize,
    thought_mode: bool,
    opts: &EpisodeOptions,
) -> ExploitOutcome {
    let mut trajectory = Trajectory::new(Phase::Exploit);
    let mut success = false;
    let result = (|| -> Result<(), OrchestratorError> {
        let task = env
            .task(task_id)
            .ok_or_else(|| OrchestratorError::Config(format!("unknown task {task_id:?}")))?;
        let (mut session, initial) = env
            .reset(task_id)
            .map_err(|source| OrchestratorError::Env { phase: Phase::Exploit, source })?;
        let mut history = History::new(&initial.text);
        let actions = templates_for(env, ActionClass::Exploitation);
        let stop = env.stop_sequences();
        let call_cap = opts.calls_per_step.max(1) * n_exploit;
        let mut thoughts = Vec::new();
        let mut usage_acc = TokenUsage::default();
        let mut rejected: Option<String> = None;
        while trajectory.steps.len() < n_exploit {
            if trajectory.backend_calls >= call_cap {
                tracing::warn!(calls = trajectory.backend_calls, "exploit call cap reached");
                break;
            }
            let shown = match &rejected {
                Some(bad) => {
                    let mut h = history.clone();
                    h.push(bad, &format!("Invalid action. Choose one of: {}.", actions.join(", ")));
                    h
                }
                None => history.clone(),
            };
            let prompt = render_prompt(
                template,
                &PromptContext {
                    task: &task.description,
                    history: Some(&shown),
                    knowledge: retrieved,
                    actions: &actions,
                    window_tokens: opts.history_window_tokens,
                    keep_recent: opts.keep_recent,
                    ..Default::default()
                },
            )?;
            let (text, usage) = call(exploiter, prompt, opts.action_max_tokens, &stop, Phase::Exploit)?;
            trajectory.backend_calls += 1;
            usage_acc += usage;
            let line = action_line(&text);
            if thought_mode && line.to_lowercase().starts_with(THOUGHT_PREFIX) {
                history.push(&line, THOUGHT_ACK);
                thoughts.push(line);
                continue;
            }
            let (action, raw) = if env.admits(&line, ActionClass::Exploitation) {
                (line, None)
            } else if rejected.is_none() {
                tracing::warn!(output = %line, "unusable exploitation action, re-prompting");
                rejected = Some(line);
                continue;
            } else {
                tracing::warn!(output = %line, "unusable exploitation action after re-prompt");
                match env.noop_action() {
                    Some(noop) => (noop.to_string(), Some(line)),
                    None => (line.clone(), Some(line)),
                }
            };
            rejected = None;
            let fb = step_env(&mut session, Some(&action), Phase::Exploit)?;
            history.push(&action, &fb.text);
            trajectory.steps.push(StepRecord {
                index: trajectory.steps.len(),
                action,
                raw,
                feedback: fb.text.clone(),
                state: fingerprint(&session.state_json()),
                reward: fb.reward,
                usage: std::mem::take(&mut usage_acc),
                thoughts: std::mem::take(&mut thoughts),
                extracted: Vec::new(),
                extraction_usage: TokenUsage::default(),
            });
            if fb.done || session.is_done() {
                trajectory.terminated_by = TerminatedBy::EnvComplete;
                success = session.goal_satisfied();
                return Ok(());
            }
        }
        trajectory.trailing_usage = usage_acc;
        trajectory.terminated_by = TerminatedBy::Budget;
        Ok(())
    })();
    let error = result.err();
    if error.is_some() {
        trajectory.terminated_by = TerminatedBy::Error;
        success = false;
    }
    ExploitOutcome {
        plan: Plan {
            actions: trajectory.actions(),
        },
        trajectory,
        success,
        error,
    }
}

fn exploit_template(prompts: &PromptSet, thought_mode: bool) -> &PromptTemplate {
    if thought_mode {
        &prompts.react
    } else {
        &prompts.exploit
    }
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    task_id: &str,
    method: Method,
    agents: &Agents,
    explore: Option<Trajectory>,
    exploit: ExploitOutcome,
    graph: &kg::KnowledgeGraph,
    task_entities: &BTreeSet<EntityId>,
    retrieved: Vec<KnowledgeTriplet>,
    error: Option<OrchestratorError>,
) -> EpisodeResult {
    let error = error.or(exploit.error).map(|e| e.to_string());
    EpisodeResult {
        task_id: task_id.to_string(),
        method,
        success: exploit.success && error.is_none(),
        total_reward: exploit.trajectory.total_reward(),
        first_reward_step: exploit.trajectory.first_reward_step(),
        explore,
        plan: exploit.plan,
        exploit: exploit.trajectory,
        graph: kg::serialize(graph),
        task_entities: task_entities.iter().map(|e| e.as_str().to_string()).collect(),
        retrieved,
        ledger: agents.ledger().snapshot(),
        error,
    }
}

fn aborted_exploit() -> ExploitOutcome {
    let mut trajectory = Trajectory::new(Phase::Exploit);
    trajectory.terminated_by = TerminatedBy::Error;
    ExploitOutcome {
        plan: Plan::default(),
        trajectory,
        success: false,
        error: None,
    }
}

/// Explore, build the graph, pick the task's slice of it, exploit.
/// SESE is this same routine with [`Agents::sese`].
#[allow(clippy::too_many_arguments)]
pub fn run_wese(
    env: &dyn Environment,
    task_id: &str,
    method: Method,
    agents: &Agents,
    prompts: &PromptSet,
    budget: PhaseBudget,
    retrieval: &RetrievalConfig,
    opts: &EpisodeOptions,
) -> EpisodeResult {
    let explored = explore_phase(env, task_id, agents, prompts, budget.n_explore, opts);
    let graph = kg::construct_graph(explored.triplets.iter().cloned());
    if let Some(e) = explored.error {
        return assemble(
            task_id,
            method,
            agents,
            Some(explored.trajectory),
            aborted_exploit(),
            &graph,
            &BTreeSet::new(),
            Vec::new(),
            Some(e),
        );
    }
    let description = env.task(task_id).map(|t| t.description).unwrap_or_default();
    let entities = match extract_task_entities(graph.entities(), &description, &agents.extractor, prompts, opts) {
        Ok((e, _)) => e,
        Err(e) => {
            return assemble(
                task_id,
                method,
                agents,
                Some(explored.trajectory),
                aborted_exploit(),
                &graph,
                &BTreeSet::new(),
                Vec::new(),
                Some(e),
            )
        }
    };
    let retrieved = retrieval.retrieve(&graph, &entities);
    let thought_mode = method.thought_mode();
    let exploit = exploit_phase(
        env,
        task_id,
        &agents.exploiter,
        exploit_template(prompts, thought_mode),
        &retrieved,
        budget.n_exploit,
        thought_mode,
        opts,
    );
    assemble(
        task_id,
        method,
        agents,
        Some(explored.trajectory),
        exploit,
        &graph,
        &entities,
        retrieved,
        None,
    )
}

/// One interleaved loop whose prompt accumulates every prior feedback.
pub fn run_coupled_baseline(
    env: &dyn Environment,
    task_id: &str,
    agents: &Agents,
    prompts: &PromptSet,
    n_steps: usize,
    thought_mode: bool,
    opts: &EpisodeOptions,
) -> EpisodeResult {
    let method = if thought_mode { Method::React } else { Method::Act };
    let exploit = exploit_phase(
        env,
        task_id,
        &agents.exploiter,
        exploit_template(prompts, thought_mode),
        &[],
        n_steps,
        thought_mode,
        opts,
    );
    assemble(
        task_id,
        method,
        agents,
        None,
        exploit,
        &kg::KnowledgeGraph::new(),
        &BTreeSet::new(),
        Vec::new(),
        None,
    )
}

/// Dispatches on the method. Coupled baselines get the exploit budget.
#[allow(clippy::too_many_arguments)]
pub fn run_method(
    method: Method,
    env: &dyn Environment,
    task_id: &str,
    agents: &Agents,
    prompts: &PromptSet,
    budget: PhaseBudget,
    retrieval: &RetrievalConfig,
    opts: &EpisodeOptions,
) -> EpisodeResult {
    if method.decoupled() {
        run_wese(env, task_id, method, agents, prompts, budget, retrieval, opts)
    } else {
        run_coupled_baseline(env, task_id, agents, prompts, budget.n_exploit, method.thought_mode(), opts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn action_line_takes_first_nonempty_line() {
        assert_eq!(action_line("\n  > go to kitchen\nmore"), "go to kitchen");
        assert_eq!(action_line(""), "");
    }
}
