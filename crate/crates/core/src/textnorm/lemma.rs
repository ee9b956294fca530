//! Rule-table lemmatizer: an irregular-form dictionary plus regular
//! plural/-ing/-ed suffix rules.
//!
//! Rules are applied to fixpoint so the result of lemmatization is itself a
//! fixed point; normalization as a whole stays idempotent. The table is
//! intentionally small — lemma exactness is not load-bearing for the topic
//! metrics, determinism is.

use std::collections::HashMap;

/// Irregular surface → lemma pairs, one `surface<TAB>lemma` per line.
/// Same file shape as the `--lemma-table PATH` override.
pub static IRREGULAR_FORMS: &str = "\
am\tbe
analyses\tanalysis
appendices\tappendix
are\tbe
ate\teat
bases\tbasis
became\tbecome
becoming\tbecome
began\tbegin
begun\tbegin
being\tbe
best\tgood
better\tgood
bought\tbuy
broke\tbreak
broken\tbreak
brought\tbring
built\tbuild
calves\tcalf
came\tcome
caught\tcatch
causing\tcause
changed\tchange
changing\tchange
charged\tcharge
charging\tcharge
children\tchild
chose\tchoose
chosen\tchoose
choosing\tchoose
closed\tclose
closing\tclose
coming\tcome
created\tcreate
creating\tcreate
crises\tcrisis
criteria\tcriterion
dealt\tdeal
decided\tdecide
deciding\tdecide
decoded\tdecode
decoding\tdecode
diagnoses\tdiagnosis
dice\tdie
did\tdo
does\tdo
doing\tdo
done\tdo
drawn\tdraw
drew\tdraw
driven\tdrive
driving\tdrive
drove\tdrive
eaten\teat
elves\telf
encoded\tencode
encoding\tencode
fallen\tfall
feet\tfoot
fell\tfall
felt\tfeel
fired\tfire
forgot\tforget
forgotten\tforget
fought\tfight
found\tfind
gave\tgive
geese\tgoose
given\tgive
giving\tgive
goes\tgo
going\tgo
gone\tgo
got\tget
gotten\tget
grew\tgrow
grown\tgrow
had\thave
has\thave
having\thave
heard\thear
held\thold
hid\thide
hidden\thide
hiding\thide
hired\thire
hoped\thope
hoping\thope
hypotheses\thypothesis
indices\tindex
invoicing\tinvoice
is\tbe
kept\tkeep
knew\tknow
known\tknow
laid\tlay
leaves\tleaf
led\tlead
left\tleave
lice\tlouse
lives\tlife
living\tlive
loaves\tloaf
losing\tlose
lost\tlose
loved\tlove
loving\tlove
made\tmake
making\tmake
managed\tmanage
managing\tmanage
matrices\tmatrix
meant\tmean
men\tman
met\tmeet
mice\tmouse
mining\tmine
moved\tmove
moving\tmove
named\tname
oxen\tox
paid\tpay
people\tperson
phenomena\tphenomenon
placed\tplace
priced\tprice
pricing\tprice
provided\tprovide
providing\tprovide
raised\traise
raising\traise
ran\trun
rated\trate
rating\trate
received\treceive
receiving\treceive
released\trelease
releasing\trelease
removed\tremove
removing\tremove
required\trequire
requiring\trequire
riding\tride
risen\trise
rising\trise
rode\tride
rose\trise
said\tsay
sat\tsit
saved\tsave
saving\tsave
saw\tsee
scarves\tscarf
seen\tsee
selves\tself
sent\tsend
served\tserve
serving\tserve
shared\tshare
sharing\tshare
shelves\tshelf
shoes\tshoe
shot\tshoot
showed\tshow
shown\tshow
sold\tsell
solved\tsolve
solving\tsolve
sought\tseek
spent\tspend
spoke\tspeak
spoken\tspeak
stated\tstate
stating\tstate
stole\tsteal
stolen\tsteal
stood\tstand
stored\tstore
storing\tstore
struck\tstrike
swam\tswim
swept\tsweep
swore\tswear
swum\tswim
taken\ttake
taking\ttake
taught\tteach
teeth\ttooth
theses\tthesis
thieves\tthief
thought\tthink
threw\tthrow
thrown\tthrow
told\ttell
took\ttake
traded\ttrade
trading\ttrade
understood\tunderstand
updated\tupdate
updating\tupdate
used\tuse
uses\tuse
using\tuse
vertices\tvertex
voted\tvote
voting\tvote
was\tbe
wearing\twear
went\tgo
were\tbe
wives\twife
wolves\twolf
women\twoman
wore\twear
worn\twear
worse\tbad
worst\tbad
written\twrite
writing\twrite
wrote\twrite
";

/// Parse a `surface<TAB>lemma` table; blank lines and `#` comments ignored.
pub fn parse_table(text: &str) -> HashMap<String, String> {
    let mut map = HashMap::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some((surface, lemma)) = line.split_once('\t') {
            map.insert(surface.trim().to_string(), lemma.trim().to_string());
        }
    }
    map
}

pub fn bundled_table() -> HashMap<String, String> {
    parse_table(IRREGULAR_FORMS)
}

fn is_vowel(c: u8) -> bool {
    matches!(c, b'a' | b'e' | b'i' | b'o' | b'u')
}

/// Undouble a trailing consonant pair ("shipp" → "ship"), preserving the
/// legitimate doubles ll/ss/zz ("sell", "class").
fn undouble(stem: &str) -> String {
    let b = stem.as_bytes();
    let n = b.len();
    if n >= 2 && b[n - 1] == b[n - 2] && !is_vowel(b[n - 1]) && !matches!(b[n - 1], b'l' | b's' | b'z')
    {
        stem[..n - 1].to_string()
    } else {
        stem.to_string()
    }
}

fn strip_plural(token: &str) -> Option<String> {
    let n = token.len();
    if n < 4 || !token.ends_with('s') {
        return None;
    }
    if token.ends_with("ss") || token.ends_with("us") || token.ends_with("is") {
        return None;
    }
    if n >= 5 && token.ends_with("ies") {
        return Some(format!("{}y", &token[..n - 3]));
    }
    if ["sses", "xes", "zes", "ches", "shes"]
        .iter()
        .any(|suf| token.ends_with(suf))
    {
        return Some(token[..n - 2].to_string());
    }
    Some(token[..n - 1].to_string())
}

fn strip_ing(token: &str) -> Option<String> {
    let n = token.len();
    if n < 6 || !token.ends_with("ing") {
        return None;
    }
    let stem = &token[..n - 3];
    if stem.bytes().all(|c| !is_vowel(c)) {
        // "string" → "str" would leave no syllable; not an inflection.
        return None;
    }
    Some(undouble(stem))
}

fn strip_ed(token: &str) -> Option<String> {
    let n = token.len();
    if n < 5 || !token.ends_with("ed") {
        return None;
    }
    let b = token.as_bytes();
    if is_vowel(b[n - 3]) {
        // "agreed", "freed" — vowel-stem past forms are table business.
        return None;
    }
    let stem = &token[..n - 2];
    if let Some(bare) = stem.strip_suffix('i') {
        return Some(format!("{bare}y"));
    }
    if stem.bytes().all(|c| !is_vowel(c)) {
        return None;
    }
    Some(undouble(stem))
}

/// Lemmatize one lowercase alphabetic token against `table` plus the regular
/// suffix rules, iterating to fixpoint.
pub fn lemmatize(token: &str, table: &HashMap<String, String>) -> String {
    let mut current = token.to_string();
    for _ in 0..4 {
        let next = if let Some(l) = table.get(current.as_str()) {
            l.clone()
        } else if let Some(l) = strip_plural(&current) {
            l
        } else if let Some(l) = strip_ing(&current) {
            l
        } else if let Some(l) = strip_ed(&current) {
            l
        } else {
            current.clone()
        };
        if next == current {
            break;
        }
        current = next;
    }
    current
}
