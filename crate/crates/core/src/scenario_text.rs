//! Motion descriptions from a scenario: an offline synonym/frame grammar
//! and a chat-completion client.
//!
//! Prompts never carry category labels, only the described motion.

use std::collections::{BTreeMap, HashSet};
use std::time::Duration;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptStyle {
    /// One fixed sentence frame and the canonical phrasing of each action.
    Template,
    /// Every synonym crossed with every sentence frame.
    #[default]
    Diverse,
    /// Several atomic actions joined with temporal connectives.
    Complex,
}

impl std::str::FromStr for PromptStyle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "template" => Ok(PromptStyle::Template),
            "diverse" => Ok(PromptStyle::Diverse),
            "complex" => Ok(PromptStyle::Complex),
            _ => Err(Error::param("style", format!("unknown style `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRequest {
    pub scenario: String,
    pub count: usize,
    #[serde(default)]
    pub style: PromptStyle,
}

impl ScenarioRequest {
    pub fn new(scenario: impl Into<String>, count: usize, style: PromptStyle) -> Result<Self> {
        let r = ScenarioRequest {
            scenario: scenario.into(),
            count,
            style,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if self.scenario.trim().is_empty() {
            return Err(Error::Empty("scenario"));
        }
        if self.count == 0 {
            return Err(Error::param("count", "must be >= 1"));
        }
        Ok(())
    }

    /// Action lemmas named by the scenario: the text after the last `:`
    /// (or all of it), split on `,`, `;`, ` then ` and ` and `.
    pub fn lemmas(&self) -> Vec<String> {
        let tail = self.scenario.rsplit(':').next().unwrap_or("");
        let mut out: Vec<String> = Vec::new();
        for part in tail.split([',', ';']) {
            for piece in part.split(" then ").flat_map(|p| p.split(" and ")) {
                let lemma = piece.trim().trim_end_matches('.').trim().to_lowercase();
                if !lemma.is_empty() && !out.contains(&lemma) {
                    out.push(lemma);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptSource {
    Llm,
    Grammar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionPrompt {
    pub text: String,
    pub atomic_actions: Vec<String>,
    /// Set when the whole prompt is one action repeated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repetitions: Option<u32>,
    pub provenance: PromptSource,
    pub seed: u64,
}

/// Action phrasings, sentence frames and temporal connectives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynonymLexicon {
    /// Lemma to third-person verb phrases ("walks forward").
    pub lemmas: BTreeMap<String, Vec<String>>,
    /// Frame id to a sentence template with one `{action}` slot.
    pub frames: BTreeMap<String, String>,
    /// Frame used by the template style.
    pub fixed_frame: String,
    /// Joiners placed between consecutive actions.
    pub connectives: Vec<String>,
    /// Sentence opening of composed prompts.
    pub subject: String,
}

pub const ACTION_SLOT: &str = "{action}";

impl SynonymLexicon {
    pub fn builtin() -> Self {
        serde_json::from_str(include_str!("../data/lexicon.json")).expect("built-in lexicon parses")
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let lex: SynonymLexicon = crate::io_util::read_json(path.as_ref())?;
        lex.validate()?;
        Ok(lex)
    }

    pub fn validate(&self) -> Result<()> {
        for (lemma, phrasings) in &self.lemmas {
            if phrasings.is_empty() || phrasings.iter().any(|p| p.trim().is_empty()) {
                return Err(Error::InvalidConfig(format!("lemma `{lemma}` has no usable phrasing")));
            }
        }
        for (id, t) in &self.frames {
            if t.matches(ACTION_SLOT).count() != 1 {
                return Err(Error::InvalidConfig(format!("frame `{id}` must contain exactly one {ACTION_SLOT}")));
            }
        }
        if !self.frames.contains_key(&self.fixed_frame) {
            return Err(Error::InvalidConfig(format!("fixed frame `{}` is not defined", self.fixed_frame)));
        }
        if self.connectives.is_empty() {
            return Err(Error::InvalidConfig("no temporal connectives".into()));
        }
        Ok(())
    }

    fn phrasings(&self, lemma: &str) -> Result<&[String]> {
        self.lemmas
            .get(lemma)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UncoveredLemma(lemma.to_string()))
    }
}

impl Default for SynonymLexicon {
    fn default() -> Self {
        SynonymLexicon::builtin()
    }
}

fn render(frame: &str, action: &str) -> String {
    frame.replacen(ACTION_SLOT, action, 1)
}

/// `(lemma, phrasing, frame id)` combinations allowed by a style.
fn combinations<'a>(lemmas: &[String], lex: &'a SynonymLexicon, style: PromptStyle) -> Result<Vec<(String, &'a str, &'a str)>> {
    let mut out = Vec::new();
    for lemma in lemmas {
        let phrasings = lex.phrasings(lemma)?;
        match style {
            PromptStyle::Template => out.push((lemma.clone(), phrasings[0].as_str(), lex.fixed_frame.as_str())),
            _ => {
                for p in phrasings {
                    for f in lex.frames.keys() {
                        out.push((lemma.clone(), p.as_str(), f.as_str()));
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Draw `req.count` distinct prompts from the lexicon.
pub fn expand_grammar(req: &ScenarioRequest, lex: &SynonymLexicon, seed: u64) -> Result<Vec<MotionPrompt>> {
    req.validate()?;
    lex.validate()?;
    let lemmas = req.lemmas();
    if lemmas.is_empty() {
        return Err(Error::Empty("scenario actions"));
    }
    if req.style == PromptStyle::Complex {
        return expand_complex(req, &lemmas, lex, seed);
    }
    let mut seen = HashSet::new();
    let mut candidates: Vec<MotionPrompt> = combinations(&lemmas, lex, req.style)?
        .into_iter()
        .filter_map(|(_, phrasing, frame)| {
            let text = render(&lex.frames[frame], phrasing);
            seen.insert(text.clone()).then(|| MotionPrompt {
                text,
                atomic_actions: vec![phrasing.to_string()],
                repetitions: None,
                provenance: PromptSource::Grammar,
                seed,
            })
        })
        .collect();
    if req.count > candidates.len() {
        return Err(Error::NotEnoughCombinations {
            requested: req.count,
            available: candidates.len(),
        });
    }
    candidates.shuffle(&mut rng::tagged(seed, "grammar"));
    candidates.truncate(req.count);
    Ok(candidates)
}

fn expand_complex(req: &ScenarioRequest, lemmas: &[String], lex: &SynonymLexicon, seed: u64) -> Result<Vec<MotionPrompt>> {
    let atoms: Vec<Vec<&String>> = lemmas
        .iter()
        .map(|l| lex.phrasings(l).map(|p| p.iter().collect()))
        .collect::<Result<_>>()?;
    let mut out: Vec<MotionPrompt> = Vec::new();
    let mut seen = HashSet::new();
    let mut draws = rng::tagged(seed, "complex");
    // Rejection sampling; the attempt budget bounds the search when the
    // lexicon cannot supply enough distinct compositions.
    let budget = 64 * req.count + 256;
    for attempt in 0..budget {
        if out.len() == req.count {
            break;
        }
        let parts = if lemmas.len() == 1 { 1 } else { draws.random_range(2..=lemmas.len().min(3)) };
        let mut order: Vec<usize> = (0..lemmas.len()).collect();
        order.shuffle(&mut draws);
        let pieces: Vec<MotionPrompt> = order[..parts]
            .iter()
            .map(|&l| {
                let p = atoms[l][draws.random_range(0..atoms[l].len())];
                MotionPrompt {
                    text: p.clone(),
                    atomic_actions: vec![p.clone()],
                    repetitions: None,
                    provenance: PromptSource::Grammar,
                    seed,
                }
            })
            .collect();
        let mut composed = compose_temporal(&pieces, lex, rng::derive_seed(seed, &format!("compose/{attempt}")))?;
        composed.seed = seed;
        if seen.insert(composed.text.clone()) {
            out.push(composed);
        }
    }
    if out.len() < req.count {
        return Err(Error::NotEnoughCombinations {
            requested: req.count,
            available: out.len(),
        });
    }
    Ok(out)
}

/// How consecutive actions are joined.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Connective {
    /// Literal joiner from the lexicon, e.g. `", then"`.
    Join(String),
    /// The single action is repeated `n` times.
    Repeat(u32),
}

fn times(n: u32) -> String {
    match n {
        1 => "once".into(),
        2 => "twice".into(),
        3 => "three times".into(),
        4 => "four times".into(),
        5 => "five times".into(),
        _ => format!("{n} times"),
    }
}

/// Join the atomic actions of `prompts`, in order, into one prompt. A single
/// prompt becomes a repetition of its action.
pub fn compose_temporal(prompts: &[MotionPrompt], lex: &SynonymLexicon, seed: u64) -> Result<MotionPrompt> {
    if prompts.is_empty() {
        return Err(Error::Empty("prompts"));
    }
    let mut r = rng::tagged(seed, "temporal");
    let count: usize = prompts.iter().map(|p| p.atomic_actions.len().max(1)).sum();
    let connectives: Vec<Connective> = if count == 1 {
        vec![Connective::Repeat(r.random_range(2..=4))]
    } else {
        (1..count)
            .map(|_| Connective::Join(lex.connectives[r.random_range(0..lex.connectives.len())].clone()))
            .collect()
    };
    compose_temporal_with(prompts, &lex.subject, &connectives, seed)
}

/// Deterministic composition with explicit connectives: one `Join` per gap
/// between actions, or a single `Repeat` for a single action.
pub fn compose_temporal_with(prompts: &[MotionPrompt], subject: &str, connectives: &[Connective], seed: u64) -> Result<MotionPrompt> {
    if prompts.is_empty() {
        return Err(Error::Empty("prompts"));
    }
    let actions: Vec<String> = prompts
        .iter()
        .flat_map(|p| {
            if p.atomic_actions.is_empty() {
                vec![p.text.trim().trim_end_matches('.').to_string()]
            } else {
                p.atomic_actions.clone()
            }
        })
        .collect();
    let mut text = format!("{subject} {}", actions[0]);
    let mut repetitions = None;
    match connectives {
        [Connective::Repeat(n)] if actions.len() == 1 => {
            if *n == 0 {
                return Err(Error::param("repetitions", "must be >= 1"));
            }
            text.push(' ');
            text.push_str(&times(*n));
            repetitions = Some(*n);
        }
        joins if joins.len() + 1 == actions.len() => {
            for (c, a) in joins.iter().zip(&actions[1..]) {
                let Connective::Join(j) = c else {
                    return Err(Error::param("connectives", "repetition only applies to a single action"));
                };
                text.push_str(j);
                text.push(' ');
                text.push_str(a);
            }
        }
        _ => {
            return Err(Error::param(
                "connectives",
                format!("{} connectives for {} actions", connectives.len(), actions.len()),
            ))
        }
    }
    text.push('.');
    Ok(MotionPrompt {
        text,
        atomic_actions: actions,
        repetitions,
        provenance: prompts[0].provenance,
        seed,
    })
}

/// Default instructions sent as the system message. Slots: `{count}`,
/// `{style_rules}`.
pub const DEFAULT_SYSTEM_PROMPT: &str = "You write short descriptions of human body motion for a motion \
generation model. Write exactly {count} descriptions, one per line, with no numbering, quotes or extra text. \
Each line describes what a single person's body does, in the present tense, starting with \"A person\". \
Never name an activity category or the purpose of the motion, only the movement itself. \
Vary the wording and sentence structure between lines and use synonyms for the same movement. \
{style_rules}";

fn style_rules(style: PromptStyle) -> &'static str {
    match style {
        PromptStyle::Template => "Use the same simple sentence pattern for every line.",
        PromptStyle::Diverse => "Each line describes one movement.",
        PromptStyle::Complex => {
            "Each line combines two or three movements in a plausible temporal order, \
             using words like then, after that, at the same time, or a repetition count."
        }
    }
}

/// Chat-completion service settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmEndpoint {
    /// Base URL; requests go to `{base_url}/chat/completions`.
    pub base_url: String,
    pub model: String,
    /// Environment variable holding the bearer token.
    pub token_env: String,
    pub timeout_s: f64,
    pub max_attempts: u32,
    pub initial_backoff_ms: u64,
    /// Use the offline grammar if the service stays unreachable.
    pub fallback_to_grammar: bool,
    pub max_in_flight: usize,
    pub system_prompt: String,
    pub temperature: f64,
}

pub const TOKEN_ENV_VAR: &str = "MMFORGE_LLM_TOKEN";

impl Default for LlmEndpoint {
    fn default() -> Self {
        LlmEndpoint {
            base_url: "http://localhost:8000/v1".into(),
            model: "default".into(),
            token_env: TOKEN_ENV_VAR.into(),
            timeout_s: 60.0,
            max_attempts: 3,
            initial_backoff_ms: 500,
            fallback_to_grammar: true,
            max_in_flight: 4,
            system_prompt: DEFAULT_SYSTEM_PROMPT.into(),
            temperature: 1.0,
        }
    }
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: String,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    temperature: f64,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatReply,
}

#[derive(Deserialize)]
struct ChatReply {
    content: String,
}

enum Attempt {
    Retry(String),
    Fatal(Error),
}

fn post_once(agent: &ureq::Agent, url: &str, token: Option<&str>, body: &ChatRequest) -> std::result::Result<String, Attempt> {
    let mut req = agent.post(url);
    if let Some(t) = token {
        req = req.header("Authorization", &format!("Bearer {t}"));
    }
    let mut resp = req.send_json(body).map_err(|e| Attempt::Retry(e.to_string()))?;
    let status = resp.status();
    let raw = resp
        .body_mut()
        .read_to_string()
        .map_err(|e| Attempt::Retry(e.to_string()))?;
    if status.is_server_error() || status.as_u16() == 429 {
        return Err(Attempt::Retry(format!("HTTP {status}")));
    }
    if !status.is_success() {
        return Err(Attempt::Fatal(Error::Network {
            attempts: 1,
            message: format!("HTTP {status}: {raw}"),
        }));
    }
    Ok(raw)
}

/// Strip list markers such as `1.`, `2)`, `-` or `*` and surrounding quotes.
fn clean_line(line: &str) -> String {
    let mut s = line.trim();
    let digits = s.len() - s.trim_start_matches(|c: char| c.is_ascii_digit()).len();
    if digits > 0 && s[digits..].starts_with(['.', ')']) {
        s = &s[digits + 1..];
    }
    s = s.trim_start_matches(['-', '*', '•']).trim();
    s.trim_matches('"').trim().to_string()
}

fn split_actions(text: &str, lex: &SynonymLexicon) -> Vec<String> {
    let mut body = text.trim().trim_end_matches('.').to_string();
    if let Some(rest) = body.strip_prefix(&format!("{} ", lex.subject)) {
        body = rest.to_string();
    }
    let mut parts = vec![body];
    for c in &lex.connectives {
        let sep = format!("{c} ");
        parts = parts
            .into_iter()
            .flat_map(|p| p.split(sep.as_str()).map(str::to_string).collect::<Vec<_>>())
            .collect();
    }
    parts.into_iter().map(|p| p.trim().to_string()).filter(|p| !p.is_empty()).collect()
}

/// Parse the first choice of a chat-completion response body into prompts.
pub fn parse_chat_response(raw: &str, count: usize, lex: &SynonymLexicon, seed: u64) -> Result<Vec<MotionPrompt>> {
    let malformed = |message: &str| Error::MalformedResponse {
        message: message.to_string(),
        raw: raw.to_string(),
    };
    if raw.trim().is_empty() {
        return Err(malformed("empty body"));
    }
    let parsed: ChatResponse = serde_json::from_str(raw).map_err(|e| malformed(&e.to_string()))?;
    let content = &parsed.choices.first().ok_or_else(|| malformed("no choices"))?.message.content;
    let prompts: Vec<MotionPrompt> = content
        .lines()
        .map(clean_line)
        .filter(|l| !l.is_empty())
        .take(count)
        .map(|text| MotionPrompt {
            atomic_actions: split_actions(&text, lex),
            text,
            repetitions: None,
            provenance: PromptSource::Llm,
            seed,
        })
        .collect();
    if prompts.is_empty() {
        return Err(malformed("no prompt lines in content"));
    }
    Ok(prompts)
}

/// Ask the chat-completion service for prompts.
///
/// Transport failures and 5xx/429 responses are retried with exponential
/// backoff. When all attempts fail and `fallback_to_grammar` is set, the
/// offline grammar answers instead.
pub fn llm_generate_prompts(req: &ScenarioRequest, endpoint: &LlmEndpoint, lex: &SynonymLexicon, seed: u64) -> Result<Vec<MotionPrompt>> {
    req.validate()?;
    let token = std::env::var(&endpoint.token_env).ok().filter(|t| !t.is_empty());
    let body = ChatRequest {
        model: &endpoint.model,
        messages: vec![
            ChatMessage {
                role: "system",
                content: endpoint
                    .system_prompt
                    .replace("{count}", &req.count.to_string())
                    .replace("{style_rules}", style_rules(req.style)),
            },
            ChatMessage {
                role: "user",
                content: format!("Scenario: {}", req.scenario.trim()),
            },
        ],
        temperature: endpoint.temperature,
    };
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs_f64(endpoint.timeout_s.max(0.001))))
        .http_status_as_error(false)
        .build()
        .into();
    let url = format!("{}/chat/completions", endpoint.base_url.trim_end_matches('/'));
    let attempts = endpoint.max_attempts.max(1);
    let mut last = String::new();
    for attempt in 0..attempts {
        if attempt > 0 {
            std::thread::sleep(Duration::from_millis(endpoint.initial_backoff_ms << (attempt - 1)));
        }
        match post_once(&agent, &url, token.as_deref(), &body) {
            Ok(raw) => return parse_chat_response(&raw, req.count, lex, seed),
            Err(Attempt::Fatal(e)) => return Err(e),
            Err(Attempt::Retry(msg)) => {
                log::warn!("LLM request attempt {} of {attempts} failed: {msg}", attempt + 1);
                last = msg;
            }
        }
    }
    if endpoint.fallback_to_grammar {
        log::warn!("LLM endpoint unreachable, using offline grammar");
        return expand_grammar(req, lex, seed);
    }
    Err(Error::Network {
        attempts,
        message: last,
    })
}

/// Run several requests with at most `endpoint.max_in_flight` outstanding.
/// Request `i` uses seed `derive_seed(seed, i)`.
pub fn llm_generate_batch(
    reqs: &[ScenarioRequest],
    endpoint: &LlmEndpoint,
    lex: &SynonymLexicon,
    seed: u64,
) -> Vec<Result<Vec<MotionPrompt>>> {
    let cap = endpoint.max_in_flight.max(1);
    let mut out = Vec::with_capacity(reqs.len());
    for (chunk_index, chunk) in reqs.chunks(cap).enumerate() {
        let results: Vec<_> = std::thread::scope(|s| {
            let handles: Vec<_> = chunk
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    let index = chunk_index * cap + i;
                    s.spawn(move || llm_generate_prompts(r, endpoint, lex, rng::derive_seed(seed, &index.to_string())))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("prompt worker panicked")).collect()
        });
        out.extend(results);
    }
    out
}
