//! Generator for the bundled offline fixture set in `fixtures/`.
//!
//! Twelve wish topics (four per tier), each with three fitting challenges
//! and usually one that shares words with the wish but works against it.
//! Two roundup pages repeat some challenges with surface edits or light
//! paraphrase. The SERP files add blocked domains, lookalike hosts,
//! duplicate URLs, low-scoring pages, a dead link and a script-only page.
//!
//! Query labels depend on which duplicate survives, so the generator runs
//! the pipeline up to dedup on the files it just wrote and labels the
//! survivors by topic.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use forge_core::model::{normalize_url, Challenge, SearchResultRecord};
use forge_core::providers::mock::MockJudgeTable;
use forge_core::providers::prompts::VALIDATE_RESULTS;
use serde_json::{json, Value};

use crate::{config, stages, write_json, CliError};

type Tier = forge_core::eval::Tier;

/// `(tier, wish)` per topic, indexed by topic number.
const TOPICS: [(Tier, &str); 12] = [
    (Tier::General, "I want to sleep better"),
    (Tier::General, "I want to feel less stressed"),
    (Tier::General, "I want to get fit and strong"),
    (Tier::General, "I want to be more energetic"),
    (Tier::FairlySpecific, "I want to drink more water"),
    (Tier::FairlySpecific, "I want to read more books"),
    (Tier::FairlySpecific, "I want to save money on food"),
    (Tier::FairlySpecific, "I want to learn Spanish vocabulary"),
    (Tier::UltraSpecific, "I want to fix my posture from sitting at a desk all day"),
    (Tier::UltraSpecific, "I want to stop scrolling my phone in bed at night"),
    (Tier::UltraSpecific, "I want to write a gratitude journal before bed"),
    (Tier::UltraSpecific, "I want to cook vegetarian dinners at home"),
];

/// Marks an item that works against its topic's wish.
const AGAINST: usize = 100;

/// `(topic, title, daily_action, description)`. Topics at or above
/// [`AGAINST`] are never relevant.
const ITEMS: &[(usize, &str, &str, &str)] = &[
    (0, "Consistent Bedtime", "go to sleep at the same time every night", "A fixed bedtime trains your body clock so falling asleep gets easier."),
    (0, "Coffee Curfew", "stop drinking coffee after noon so you sleep better", "Caffeine lingers for hours; an early cutoff protects deep sleep."),
    (0, "Cave Bedroom", "keep your bedroom dark and cool for better sleep", "Blackout curtains and a cooler room signal that it is time to rest."),
    (AGAINST, "Hustle Hours", "cut your sleep to five hours to get more done", "Trade rest for output by shortening every night."),
    (1, "Ten Minute Calm", "meditate for ten minutes to feel less stressed", "A short daily sit lowers tension and builds a calm habit."),
    (1, "Stress Walk", "take a slow walk outside when you feel stressed", "Fresh air and steady steps help reset a racing mind."),
    (1, "Worry Dump", "write down what is making you feel stressed and one small fix", "Naming the worry and a next step shrinks it."),
    (AGAINST + 1, "Always On", "check work email every hour so you never feel behind", "Stay on top of the inbox around the clock."),
    (2, "Push Up Ladder", "do twenty push ups to get strong", "Build upper body strength one set at a time."),
    (2, "Quick Burn", "do a fifteen minute bodyweight workout to get fit", "No equipment, no gym, just fifteen focused minutes."),
    (2, "Plank Hold", "hold a plank for one minute to build core strength", "A strong core supports every other movement."),
    (AGAINST + 2, "Couch Recovery", "skip the gym and rest on the couch to get over soreness", "Rest days all month long."),
    (3, "Morning Glass", "drink a glass of water right after waking for more energy", "Rehydrate first thing to shake off grogginess."),
    (3, "Lunch Loop", "take a ten minute walk after lunch to be more energetic", "A short walk beats the afternoon slump."),
    (3, "Protein Start", "eat a protein breakfast to keep your energy steady", "Protein in the morning avoids the mid-morning crash."),
    (AGAINST + 3, "Can A Day", "drink an extra energy drink every afternoon", "A sugary boost whenever you flag."),
    (4, "Eight Glasses", "drink eight glasses of water", "The classic hydration target, glass by glass."),
    (4, "Bottle Twice", "carry a refillable water bottle and finish it twice", "Keep water in reach and set a simple refill goal."),
    (4, "Glass Before Meals", "drink a glass of water before every meal", "Tie hydration to meals you already eat."),
    (AGAINST + 4, "Soda Swap", "replace water with soda at every meal", "Fizzy drinks at every sitting."),
    (5, "Twenty Pages", "read twenty pages of a book before bed", "Twenty pages a night finishes a book every two weeks."),
    (5, "Commute Chapter", "read one chapter of a book during your commute", "Turn travel time into reading time."),
    (5, "Library Haul", "visit the library and pick more books to read", "A stack of borrowed books keeps the habit going."),
    (AGAINST + 5, "Movie Night", "watch a movie instead of reading a book", "Let the screen tell the story."),
    (6, "Packed Lunch", "pack your lunch instead of buying food out to save money", "Homemade lunches add up to real savings."),
    (6, "List First", "plan a weekly grocery list to save money on food", "Shopping with a list cuts impulse buys."),
    (6, "Pantry Staples", "cook rice and beans at home to cut food costs", "Cheap staples stretch the food budget."),
    (AGAINST + 6, "Delivery Habit", "order food delivery every night", "Let someone else cook, every single night."),
    (7, "Ten New Words", "learn ten new Spanish vocabulary words", "Ten words a day is three hundred in a month."),
    (7, "Flashcard Review", "review Spanish vocabulary flashcards for fifteen minutes", "Spaced review makes new words stick."),
    (7, "Label Your Home", "label objects around your home with their Spanish names", "See the words wherever you look."),
    (8, "Hourly Stand", "set a timer to stand up from your desk every hour", "Break up long sitting spells."),
    (8, "Desk Stretches", "do five minutes of posture stretches after sitting at your desk", "Open the chest and reset the shoulders."),
    (8, "Ergonomic Setup", "adjust your desk chair and screen to sit upright", "A good setup makes good posture the default."),
    (AGAINST + 8, "Couch Office", "work from the couch all day instead of a desk", "Trade the desk for the sofa."),
    (9, "Phone Outside", "leave your phone outside the bedroom at night", "Charge it in another room and keep bed for sleep."),
    (9, "Scroll Curfew", "stop scrolling social media one hour before bed", "A screen-free hour before lights out."),
    (9, "Grayscale Evenings", "turn on grayscale mode on your phone after dinner", "A dull screen is easier to put down."),
    (AGAINST + 9, "Scroll To Sleep", "scroll your phone in bed until you fall asleep", "Let the feed carry you off."),
    (10, "Three Good Things", "write three things you are grateful for in a gratitude journal before bed", "End the day by noticing what went well."),
    (10, "Thank You Note", "write one gratitude journal entry about a person who helped you", "Gratitude aimed at someone specific."),
    (10, "Read Back", "read your gratitude journal before bed and add one line", "Revisit old entries and add a new one."),
    (AGAINST + 10, "Complaint Log", "write a list of complaints before bed", "Get every gripe down on paper."),
    (11, "Veggie Dinner", "cook a vegetarian dinner at home", "One meat-free dinner cooked in your own kitchen."),
    (11, "New Recipe", "try a new vegetarian recipe for dinner", "Explore a new dish every night."),
    (11, "Prep Ahead", "prep vegetables for tomorrow's dinners at home", "Chopped vegetables make tomorrow's dinner quick."),
    (AGAINST + 11, "Takeout Nights", "order takeout dinners instead of cooking at home", "Skip the stove entirely."),
];

/// Repeats on roundup pages: `(original action, repeated action)`.
const REPEATS: &[(&str, &str)] = &[
    ("drink eight glasses of water", "Drink eight glasses of water!"),
    ("drink eight glasses of water", "drink 8 glasses of water"),
    ("go to sleep at the same time every night", "go to sleep at the same time each night"),
    ("read twenty pages of a book before bed", "read 20 pages of a book before bed"),
    ("cook a vegetarian dinner at home", "Cook a vegetarian dinner at home."),
    ("meditate for ten minutes to feel less stressed", "meditate for 10 minutes to feel less stressed"),
    ("learn ten new Spanish vocabulary words", "learn 10 new Spanish vocabulary words"),
    ("leave your phone outside the bedroom at night", "leave your phone out of the bedroom at night"),
];

struct Page {
    url: &'static str,
    title: &'static str,
    score: u8,
    /// Topic pages list their topic; roundups list repeat indices.
    content: Content,
}

enum Content {
    Topic(usize),
    Repeats(&'static [usize], Value),
    Prose(&'static str),
    ScriptOnly,
    Missing,
}

fn pages() -> Vec<Page> {
    let topic_pages: [(&str, &str, u8); 12] = [
        ("https://www.sleepwell.example/30-day-sleep-challenge", "30-Day Sleep Challenge", 9),
        ("https://calmliving.example/blog/stress-less-30-days", "Stress Less in 30 Days", 8),
        ("https://fitfolks.example/30-day-fitness-challenge/", "The 30-Day Fitness Challenge", 9),
        ("https://energyhub.example/energy-challenge", "A Month of Better Energy", 7),
        ("https://hydrate.example/water-challenge", "30-Day Water Challenge", 8),
        ("https://bookworms.example/reading-challenge", "Read More This Month", 8),
        ("https://frugal.example/food-savings-month", "Save on Food for 30 Days", 7),
        ("https://lingo.example/spanish-30-days", "Spanish in 30 Days", 6),
        ("https://deskhealth.example/posture-challenge", "Fix Your Desk Posture", 7),
        ("https://unplug.example/phone-free-nights", "Phone-Free Nights", 8),
        ("https://journaling.example/gratitude-30", "30 Days of Gratitude", 9),
        ("https://veggie.example/30-day-vegetarian", "30-Day Vegetarian Dinners", 8),
    ];
    let mut out: Vec<Page> = topic_pages
        .iter()
        .enumerate()
        .map(|(i, &(url, title, score))| Page {
            url,
            title,
            score,
            content: Content::Topic(i),
        })
        .collect();
    out.push(Page {
        url: "https://listicle.example/best-30-day-challenges",
        title: "The Best 30-Day Challenges",
        score: 7,
        content: Content::Repeats(
            &[0, 1, 2, 3, 4],
            json!({"title": "Mystery Goal", "description": "No wish given.", "wish": "", "daily_action": "do something"}),
        ),
    });
    out.push(Page {
        url: "https://another-roundup.example/challenges",
        title: "More Monthly Challenges",
        score: 6,
        content: Content::Repeats(
            &[5, 6, 7],
            json!({"title": "Half Written", "description": "Action missing.", "wish": "be better"}),
        ),
    });
    out.push(Page {
        url: "https://news.example/health-headlines",
        title: "Health Headlines",
        score: 3,
        content: Content::Prose("Today in health news: a study on sleep and a report on city parks."),
    });
    out.push(Page {
        url: "https://shop.example/yoga-mats",
        title: "Yoga Mats on Sale",
        score: 1,
        content: Content::Prose("Shop our yoga mats. Free shipping on orders over fifty dollars."),
    });
    out.push(Page {
        url: "https://forum.example/thread/30-day",
        title: "Anyone done a 30 day thing?",
        score: 5,
        content: Content::Prose("I tried a thirty day plan once. It went fine I guess."),
    });
    out.push(Page {
        url: "https://myreddit.com/post/30-day",
        title: "My 30 day post",
        score: 2,
        content: Content::Prose("A personal blog that only sounds like a forum."),
    });
    out.push(Page {
        url: "https://youtube.com.mirror.example/watch",
        title: "Mirror site",
        score: 2,
        content: Content::Prose("A mirror host whose name merely starts with a video site."),
    });
    out.push(Page {
        url: "https://brokenlink.example/gone",
        title: "Gone",
        score: 9,
        content: Content::Missing,
    });
    out.push(Page {
        url: "https://scripts.example/app",
        title: "App shell",
        score: 9,
        content: Content::ScriptOnly,
    });
    out
}

/// Hosts on the default blocklist, each listed once in the SERP files.
pub const BLOCKED_URLS: &[&str] = &[
    "https://www.youtube.com/watch?v=abc123",
    "https://pinterest.com/pin/30-day-ideas",
    "https://m.facebook.com/groups/30daychallenge",
    "https://www.amazon.com/30-day-journal",
    "https://reddit.com/r/getdisciplined/30-days",
    "https://www.tiktok.com/@coach/video/1",
];

fn wish_phrase(topic: usize) -> String {
    TOPICS[topic % AGAINST].1.trim_start_matches("I want to ").to_string()
}

fn item_json(topic: usize, title: &str, action: &str, description: &str) -> Value {
    json!({"title": title, "description": description, "wish": wish_phrase(topic), "daily_action": action})
}

fn find_item(action: &str) -> &'static (usize, &'static str, &'static str, &'static str) {
    ITEMS.iter().find(|i| i.2 == action).expect("repeat refers to a known item")
}

fn page_items(page: &Page) -> Vec<Value> {
    match &page.content {
        Content::Topic(t) => ITEMS
            .iter()
            .filter(|i| i.0 % AGAINST == *t)
            .map(|&(topic, title, action, desc)| item_json(topic, title, action, desc))
            .collect(),
        Content::Repeats(idx, bad) => {
            let mut items: Vec<Value> = idx
                .iter()
                .map(|&r| {
                    let (orig, repeat) = REPEATS[r];
                    let &(topic, title, _, desc) = find_item(orig);
                    item_json(topic, title, repeat, desc)
                })
                .collect();
            items.push(bad.clone());
            items
        }
        _ => Vec::new(),
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn page_html(page: &Page) -> Option<String> {
    let chrome_top = "<nav><a href=\"/\">Home</a> <a href=\"/about\">About</a></nav>";
    let chrome_bottom = "<footer>Copyright and cookie notice.</footer>";
    let body = match &page.content {
        Content::Missing => return None,
        Content::ScriptOnly => {
            return Some("<html><head><script>window.app = {};</script></head><body><script>render()</script></body></html>".into())
        }
        Content::Prose(text) => format!("<p>{}</p>", escape(text)),
        _ => {
            let mut s = String::from("<p>Pick a challenge and stick with it for thirty days.</p><ol>");
            for item in page_items(page) {
                let field = |k: &str| escape(item.get(k).and_then(Value::as_str).unwrap_or(""));
                s.push_str(&format!(
                    "<li><h2>{}</h2><p>{}</p><p>Every day: {}</p></li>",
                    field("title"),
                    field("description"),
                    field("daily_action")
                ));
            }
            s.push_str("</ol>");
            s
        }
    };
    Some(format!(
        "<html><head><title>{t}</title><style>body {{ margin: 0 }}</style></head><body>{chrome_top}<h1>{t}</h1>{body}{chrome_bottom}</body></html>",
        t = escape(page.title)
    ))
}

/// Search hits per query id, cycling through the pages so every query has
/// one to three hits. Some URLs appear twice under different spellings.
fn serp_records(pages: &[Page]) -> Vec<SearchResultRecord> {
    let mut urls: Vec<(String, &str)> = pages.iter().map(|p| (p.url.to_string(), p.title)).collect();
    urls.extend(BLOCKED_URLS.iter().map(|u| (u.to_string(), "Blocked host")));
    urls.push(("https://FitFolks.example/30-day-fitness-challenge".into(), "The 30-Day Fitness Challenge"));
    urls.push(("https://hydrate.example/water-challenge/".into(), "30-Day Water Challenge"));
    urls.push(("https://journaling.example/gratitude-30".into(), "30 Days of Gratitude"));
    let mut out = Vec::new();
    for (i, (url, title)) in urls.into_iter().enumerate() {
        out.push(SearchResultRecord {
            query_id: format!("q{:02}", i % 25 + 1),
            url,
            title: title.to_string(),
            snippet: format!("{title}: ideas for a month of small daily steps."),
        });
    }
    out.sort_by(|a, b| a.query_id.cmp(&b.query_id));
    out
}

fn judge_table(pages: &[Page]) -> MockJudgeTable {
    let mut t = MockJudgeTable::default();
    for p in pages {
        let url = normalize_url(p.url).expect("fixture urls parse");
        t.set_score(&url, p.score);
        let items = page_items(p);
        if !items.is_empty() {
            t.set_extraction(&url, Value::Array(items));
        }
    }
    for (orig, repeat) in REPEATS {
        t.set_duplicate(orig, repeat, true);
    }
    t.table_mut(VALIDATE_RESULTS).default = Some(Value::Bool(false));
    for (topic, (_, wish)) in TOPICS.iter().enumerate() {
        for action in actions_for(topic) {
            t.set_relevant(wish, &action, true);
        }
    }
    t
}

/// Every daily action, original or repeated, that serves `topic`.
fn actions_for(topic: usize) -> Vec<String> {
    let mut out: Vec<String> = ITEMS.iter().filter(|i| i.0 == topic).map(|i| i.2.to_string()).collect();
    for (orig, repeat) in REPEATS {
        if find_item(orig).0 == topic {
            out.push(repeat.to_string());
        }
    }
    out
}

fn write_lines<T: serde::Serialize>(path: &Path, items: &[T]) -> Result<(), CliError> {
    let mut buf = Vec::new();
    forge_core::model::write_jsonl(&mut buf, items).map_err(|e| CliError::io(path, e))?;
    std::fs::write(path, buf).map_err(|e| CliError::io(path, e))
}

pub fn config_json() -> Value {
    json!({
        "seed": 7,
        "providers": {
            "mode": "mock",
            "max_in_flight": 4,
            "mock": {"seed": 7, "dim": 64, "judge_table": "mock_judge.json"}
        },
        "paths": {
            "serp": ["serp/general.jsonl", "serp/themed.jsonl"],
            "pages": "pages.jsonl",
            "queries": "queries.jsonl",
            "work_dir": "out"
        },
        "collect": {"keep_threshold": 6},
        "search": {"k": 5, "retrieve_k": 50, "validate": true}
    })
}

/// Writes the fixture set into `dir`, then labels the query set against a
/// scratch pipeline run in `dir/.label-run`, which is removed afterwards.
pub fn write_bundle(dir: &Path) -> Result<(), CliError> {
    let serp_dir = dir.join("serp");
    std::fs::create_dir_all(&serp_dir).map_err(|e| CliError::io(&serp_dir, e))?;
    let pages = pages();

    let records = serp_records(&pages);
    let (general, themed): (Vec<_>, Vec<_>) = records.into_iter().partition(|r| r.query_id.as_str() <= "q11");
    write_lines(&serp_dir.join("general.jsonl"), &general)?;
    write_lines(&serp_dir.join("themed.jsonl"), &themed)?;

    let html: Vec<Value> = pages
        .iter()
        .filter_map(|p| page_html(p).map(|h| json!({"url": p.url, "html": h})))
        .collect();
    write_lines(&dir.join("pages.jsonl"), &html)?;
    write_json(&dir.join("mock_judge.json"), &judge_table(&pages))?;
    let config_path = dir.join("config.json");
    write_json(&config_path, &config_json())?;

    let scratch = std::path::absolute(dir.join(".label-run")).map_err(|e| CliError::io(dir, e))?;
    let cfg = config::load(Some(&config_path), &[format!("paths.work_dir={}", scratch.display())])?;
    stages::collect(&cfg)?;
    stages::filter(&cfg)?;
    stages::extract(&cfg)?;
    stages::dedup(&cfg)?;
    let survivors: Vec<Challenge> = {
        let path = scratch.join(stages::CHALLENGES_DEDUP);
        let text = std::fs::read(&path).map_err(|e| CliError::io(&path, e))?;
        forge_core::model::read_jsonl(&text[..]).map_err(|e| CliError::Internal(e.to_string()))?
    };
    std::fs::remove_dir_all(&scratch).map_err(|e| CliError::io(&scratch, e))?;

    let topic_of: HashMap<String, usize> = (0..TOPICS.len())
        .flat_map(|t| actions_for(t).into_iter().map(move |a| (a, t)))
        .collect();
    let queries: Vec<Value> = TOPICS
        .iter()
        .enumerate()
        .map(|(t, (tier, wish))| {
            let relevant: Vec<&str> = survivors
                .iter()
                .filter(|c| topic_of.get(&c.daily_action) == Some(&t))
                .map(|c| c.id.as_str())
                .collect();
            json!({"id": format!("w{:02}", t + 1), "text": wish, "tier": tier, "relevant_ids": relevant})
        })
        .collect();
    write_lines(&dir.join("queries.jsonl"), &queries)?;
    Ok(())
}

/// Expected outcome of the URL filter on the bundled fixture, computed from
/// the tables above rather than the pipeline: URLs kept by the blocklist and
/// the subset the judge scores at or above `threshold` among fetchable pages.
pub fn expected_filter(threshold: u8) -> (Vec<String>, Vec<String>) {
    let pages = pages();
    let blocked: Vec<String> = BLOCKED_URLS.iter().map(|u| normalize_url(u).expect("parses")).collect();
    let kept: Vec<String> = pages
        .iter()
        .filter(|p| p.score >= threshold && !matches!(p.content, Content::Missing | Content::ScriptOnly))
        .map(|p| normalize_url(p.url).expect("parses"))
        .collect();
    (blocked, kept)
}

/// Topic count per tier, for sanity checks.
pub fn tiers() -> BTreeMap<Tier, usize> {
    let mut m = BTreeMap::new();
    for (tier, _) in TOPICS {
        *m.entry(tier).or_default() += 1;
    }
    m
}
