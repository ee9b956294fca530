//! Character-trigram language identification.
//!
//! Replaces an off-the-shelf detector with a specified, testable mechanism:
//! padded word trigrams are scored by histogram intersection against bundled
//! profiles for en/de/fr/es and transliterated Russian. Profiles are built
//! once from embedded function-word-heavy sample text.
//!
//! All maps are `BTreeMap` so score sums have a fixed order and verdicts are
//! identical across runs.

use std::collections::BTreeMap;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lang {
    En,
    De,
    Fr,
    Es,
    Ru,
    Undetermined,
}

impl Lang {
    pub fn code(self) -> &'static str {
        match self {
            Lang::En => "en",
            Lang::De => "de",
            Lang::Fr => "fr",
            Lang::Es => "es",
            Lang::Ru => "ru",
            Lang::Undetermined => "und",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LanguageVerdict {
    pub lang: Lang,
    pub confidence: f64,
}

const MIN_ALPHABETIC_CHARS: usize = 20;

/// Keep threshold used by the pipeline: English with at least this confidence.
pub const ENGLISH_CONFIDENCE_THRESHOLD: f64 = 0.5;

static SAMPLE_EN: &str = "the quick answer is that most of the people who visit this page want \
to know how the service works and what they need to do before they can use it for the first \
time because there are many steps that have to be done in the right order when you make an \
account and then you will see that the system shows all of the things which were sent to you \
over the last few days and it is also possible to change these settings at any time so that \
only the most important messages will be shown to you while everything else stays hidden from \
view until you ask for it again and this should be enough for the common case";

static SAMPLE_DE: &str = "die meisten leute die diese seite besuchen wollen wissen wie der \
dienst funktioniert und was sie tun muessen bevor sie ihn zum ersten mal benutzen koennen weil \
es viele schritte gibt die in der richtigen reihenfolge gemacht werden muessen wenn man ein \
konto erstellt und dann wird man sehen dass das system alle dinge zeigt die einem in den \
letzten tagen geschickt wurden und es ist auch moeglich diese einstellungen jederzeit zu \
aendern so dass nur die wichtigsten nachrichten angezeigt werden waehrend alles andere \
verborgen bleibt bis man wieder danach fragt";

static SAMPLE_FR: &str = "la plupart des gens qui visitent cette page veulent savoir comment \
le service fonctionne et ce qu ils doivent faire avant de pouvoir l utiliser pour la premiere \
fois parce qu il y a beaucoup d etapes qui doivent etre faites dans le bon ordre quand on cree \
un compte et ensuite on verra que le systeme montre toutes les choses qui ont ete envoyees au \
cours des derniers jours et il est aussi possible de changer ces parametres a tout moment pour \
que seuls les messages les plus importants soient affiches tandis que tout le reste demeure \
cache jusqu a ce qu on le demande encore";

static SAMPLE_ES: &str = "la mayoria de las personas que visitan esta pagina quieren saber \
como funciona el servicio y que deben hacer antes de poder usarlo por primera vez porque hay \
muchos pasos que deben hacerse en el orden correcto cuando se crea una cuenta y entonces se \
vera que el sistema muestra todas las cosas que fueron enviadas durante los ultimos dias y \
tambien es posible cambiar estos ajustes en cualquier momento para que solo se muestren los \
mensajes mas importantes mientras todo lo demas permanece oculto hasta que se pida otra vez";

static SAMPLE_RU: &str = "bolshinstvo lyudey kotorye poseshchayut etu stranitsu khotyat znat \
kak rabotaet servis i chto im nuzhno sdelat prezhde chem oni smogut ispolzovat ego v pervyy \
raz potomu chto est mnogo shagov kotorye dolzhny byt sdelany v pravilnom poryadke kogda vy \
sozdaete akkaunt i togda vy uvidite chto sistema pokazyvaet vse veshchi kotorye byli \
otpravleny vam za poslednie dni i takzhe mozhno izmenit eti nastroyki v lyuboe vremya chtoby \
tolko samye vazhnye soobshcheniya byli pokazany poka vse ostalnoe ostaetsya skrytym poka vy \
ne poprosite snova";

type Profile = BTreeMap<[char; 3], f64>;

/// Padded word trigrams with relative frequencies.
fn trigram_profile(text: &str) -> Profile {
    let mut counts: BTreeMap<[char; 3], u64> = BTreeMap::new();
    let mut total = 0u64;
    let lowered = text.to_lowercase();
    for word in lowered.split(|c: char| !c.is_alphabetic()) {
        if word.is_empty() {
            continue;
        }
        let padded: Vec<char> = std::iter::once(' ')
            .chain(word.chars())
            .chain(std::iter::once(' '))
            .collect();
        for w in padded.windows(3) {
            *counts.entry([w[0], w[1], w[2]]).or_insert(0) += 1;
            total += 1;
        }
    }
    counts
        .into_iter()
        .map(|(k, v)| (k, v as f64 / total.max(1) as f64))
        .collect()
}

static PROFILES: LazyLock<Vec<(Lang, Profile)>> = LazyLock::new(|| {
    vec![
        (Lang::En, trigram_profile(SAMPLE_EN)),
        (Lang::De, trigram_profile(SAMPLE_DE)),
        (Lang::Fr, trigram_profile(SAMPLE_FR)),
        (Lang::Es, trigram_profile(SAMPLE_ES)),
        (Lang::Ru, trigram_profile(SAMPLE_RU)),
    ]
});

fn intersection(doc: &Profile, lang: &Profile) -> f64 {
    doc.iter()
        .map(|(k, v)| lang.get(k).map_or(0.0, |w| v.min(*w)))
        .sum()
}

/// Best-guess language of extracted main-content text.
///
/// `Undetermined` exactly when the input has fewer than 20 alphabetic
/// characters; otherwise the highest-scoring profile wins. Confidence is the
/// winner's margin over the runner-up, `best / (best + second)`, so text
/// dominated by out-of-profile vocabulary still yields a decisive verdict
/// when only one language explains the in-profile part.
pub fn detect_language(text: &str) -> LanguageVerdict {
    let alphabetic = text.chars().filter(|c| c.is_alphabetic()).count();
    if alphabetic < MIN_ALPHABETIC_CHARS {
        return LanguageVerdict {
            lang: Lang::Undetermined,
            confidence: 0.0,
        };
    }
    let doc = trigram_profile(text);
    let mut scores: Vec<(Lang, f64)> = PROFILES
        .iter()
        .map(|(lang, profile)| (*lang, intersection(&doc, profile)))
        .collect();
    scores.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("scores are finite"));
    let (best_lang, best_score) = scores[0];
    let second_score = scores[1].1;
    let confidence = if best_score > 0.0 {
        best_score / (best_score + second_score)
    } else {
        0.0
    };
    LanguageVerdict {
        lang: best_lang,
        confidence,
    }
}

/// Pipeline retention rule: keep iff English wins with confidence ≥ 0.5.
pub fn is_retained(verdict: &LanguageVerdict) -> bool {
    verdict.lang == Lang::En && verdict.confidence >= ENGLISH_CONFIDENCE_THRESHOLD
}
