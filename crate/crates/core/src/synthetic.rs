//! Offline desk corpus: 20 occupations, each with per-language synonyms and a
//! shared set of English skill labels.
//!
//! Every occupation yields 10 titles per language built as (synonym, modifier)
//! combinations; the German, Spanish and Chinese titles are translations of the
//! English combination with the same indices. Titles 0..8 are training data,
//! titles 8 and 9 are held out for evaluation. Modifiers are shared across
//! occupations and carry no occupational signal.

use std::collections::{BTreeMap, BTreeSet};

use crate::corpus::{JobAdRecord, Language};
use crate::encoder::{ModelParams, Space};
use crate::error::Result;
use crate::metrics::{evaluate_run, MetricReport, Qrels, Run};
use crate::ranker::{build_index, rank_titles, SkillGazetteer, SkillIndex};
use crate::rng::SplitMix64;
use crate::translate::{LookupProvider, ID_SEPARATOR};

pub const TITLES_PER_CLUSTER: usize = 10;
pub const TRAIN_TITLES_PER_CLUSTER: usize = 8;

struct Occupation {
    key: &'static str,
    en: [&'static str; 3],
    de: [&'static str; 3],
    es: [&'static str; 3],
    zh: [&'static str; 3],
    skills: [&'static str; 7],
}

const OCCUPATIONS: [Occupation; 20] = [
    Occupation {
        key: "chef",
        en: ["chef", "cook", "culinarian"],
        de: ["Koch", "Küchenchef", "Gastronom"],
        es: ["cocinero", "chef de cocina", "jefe de cocina"],
        zh: ["厨师", "主厨", "烹饪师"],
        skills: [
            "prepare dishes",
            "plan menus",
            "food safety",
            "kitchen hygiene",
            "manage kitchen staff",
            "order ingredients",
            "cooking techniques",
        ],
    },
    Occupation {
        key: "nurse",
        en: ["nurse", "caregiver", "registered nurse"],
        de: ["Krankenpfleger", "Pflegekraft", "Krankenschwester"],
        es: ["enfermero", "auxiliar de enfermería", "cuidador"],
        zh: ["护士", "护理员", "护理师"],
        skills: [
            "patient care",
            "administer medication",
            "monitor vital signs",
            "wound care",
            "medical records",
            "infection control",
            "patient education",
        ],
    },
    Occupation {
        key: "welder",
        en: ["welder", "metal fabricator", "welding technician"],
        de: ["Schweißer", "Metallbauer", "Schweißtechniker"],
        es: ["soldador", "técnico de soldadura", "herrero"],
        zh: ["焊工", "电焊工", "焊接技师"],
        skills: [
            "arc welding",
            "read blueprints",
            "metal cutting",
            "welding inspection",
            "operate welding equipment",
            "metal fabrication",
            "workshop safety",
        ],
    },
    Occupation {
        key: "accountant",
        en: ["accountant", "bookkeeper", "auditor"],
        de: ["Buchhalter", "Steuerberater", "Wirtschaftsprüfer"],
        es: ["contador", "contable", "auditor de cuentas"],
        zh: ["会计", "会计师", "审计师"],
        skills: [
            "bookkeeping",
            "financial reporting",
            "tax preparation",
            "accounts payable",
            "auditing",
            "budget control",
            "payroll processing",
        ],
    },
    Occupation {
        key: "developer",
        en: ["software developer", "programmer", "software engineer"],
        de: ["Softwareentwickler", "Programmierer", "Informatiker"],
        es: [
            "desarrollador de software",
            "programador",
            "ingeniero de software",
        ],
        zh: ["软件开发人员", "程序员", "软件工程师"],
        skills: [
            "software development",
            "write code",
            "debug software",
            "version control",
            "unit testing",
            "software design",
            "database queries",
        ],
    },
    Occupation {
        key: "driver",
        en: ["truck driver", "lorry driver", "trucker"],
        de: ["LKW-Fahrer", "Berufskraftfahrer", "Fernfahrer"],
        es: ["camionero", "conductor de camión", "chofer"],
        zh: ["卡车司机", "货车司机", "运输司机"],
        skills: [
            "drive heavy vehicles",
            "route planning",
            "cargo loading",
            "vehicle inspection",
            "logbook keeping",
            "traffic regulations",
            "fuel management",
        ],
    },
    Occupation {
        key: "electrician",
        en: ["electrician", "electrical installer", "wireman"],
        de: ["Elektriker", "Elektroinstallateur", "Elektroniker"],
        es: [
            "electricista",
            "instalador eléctrico",
            "técnico electricista",
        ],
        zh: ["电工", "电气安装工", "电气技师"],
        skills: [
            "electrical wiring",
            "install circuits",
            "electrical safety",
            "troubleshoot electrical faults",
            "read wiring diagrams",
            "install lighting",
            "test electrical systems",
        ],
    },
    Occupation {
        key: "teacher",
        en: ["teacher", "educator", "instructor"],
        de: ["Lehrer", "Pädagoge", "Lehrkraft"],
        es: ["profesor", "maestro", "docente"],
        zh: ["教师", "老师", "讲师"],
        skills: [
            "lesson planning",
            "classroom management",
            "assess students",
            "curriculum design",
            "teach mathematics",
            "parent communication",
            "student counselling",
        ],
    },
    Occupation {
        key: "sales",
        en: ["sales representative", "account executive", "salesperson"],
        de: [
            "Vertriebsmitarbeiter",
            "Verkäufer",
            "Außendienstmitarbeiter",
        ],
        es: ["representante de ventas", "vendedor", "ejecutivo comercial"],
        zh: ["销售代表", "销售员", "业务员"],
        skills: [
            "sales negotiation",
            "customer acquisition",
            "sales forecasting",
            "product demonstration",
            "crm software",
            "close deals",
            "territory management",
        ],
    },
    Occupation {
        key: "pharmacist",
        en: ["pharmacist", "chemist", "dispenser"],
        de: ["Apotheker", "Pharmazeut", "Apothekenassistent"],
        es: ["farmacéutico", "boticario", "técnico de farmacia"],
        zh: ["药剂师", "药师", "配药师"],
        skills: [
            "dispense medicines",
            "pharmaceutical advice",
            "drug interactions",
            "prescription review",
            "inventory of medicines",
            "compounding",
            "pharmacovigilance",
        ],
    },
    Occupation {
        key: "carpenter",
        en: ["carpenter", "joiner", "woodworker"],
        de: ["Tischler", "Zimmermann", "Schreiner"],
        es: ["carpintero", "ebanista", "carpintero de obra"],
        zh: ["木工", "木匠", "细木工"],
        skills: [
            "woodworking",
            "cut timber",
            "furniture assembly",
            "install doors",
            "use hand tools",
            "measure materials",
            "wood finishing",
        ],
    },
    Occupation {
        key: "designer",
        en: ["graphic designer", "visual designer", "illustrator"],
        de: ["Grafikdesigner", "Mediengestalter", "Illustrator"],
        es: ["diseñador gráfico", "diseñador visual", "ilustrador"],
        zh: ["平面设计师", "视觉设计师", "插画师"],
        skills: [
            "graphic design",
            "typography",
            "adobe illustrator",
            "create logos",
            "visual communication",
            "layout design",
            "colour theory",
        ],
    },
    Occupation {
        key: "analyst",
        en: ["data analyst", "business analyst", "analytics specialist"],
        de: ["Datenanalyst", "Business-Analyst", "Datenspezialist"],
        es: [
            "analista de datos",
            "analista de negocio",
            "especialista en analítica",
        ],
        zh: ["数据分析师", "业务分析师", "数据专员"],
        skills: [
            "data analysis",
            "sql",
            "statistical analysis",
            "data visualisation",
            "excel",
            "build dashboards",
            "data cleaning",
        ],
    },
    Occupation {
        key: "mechanic",
        en: ["mechanic", "auto technician", "service technician"],
        de: ["Mechaniker", "Kfz-Mechatroniker", "Werkstatttechniker"],
        es: ["mecánico", "técnico automotriz", "mecánico de taller"],
        zh: ["机械师", "汽车技师", "维修技工"],
        skills: [
            "vehicle repair",
            "engine diagnostics",
            "brake maintenance",
            "replace parts",
            "vehicle servicing",
            "diagnostic tools",
            "tyre fitting",
        ],
    },
    Occupation {
        key: "receptionist",
        en: ["receptionist", "front desk clerk", "front office agent"],
        de: ["Empfangsmitarbeiter", "Rezeptionist", "Empfangskraft"],
        es: [
            "recepcionista",
            "auxiliar de recepción",
            "agente de recepción",
        ],
        zh: ["前台接待", "接待员", "前台文员"],
        skills: [
            "greet visitors",
            "answer telephone",
            "schedule appointments",
            "front desk operations",
            "handle mail",
            "visitor registration",
            "office administration",
        ],
    },
    Occupation {
        key: "warehouse",
        en: ["warehouse worker", "order picker", "stock handler"],
        de: ["Lagerarbeiter", "Kommissionierer", "Lagerhelfer"],
        es: [
            "mozo de almacén",
            "operario de almacén",
            "preparador de pedidos",
        ],
        zh: ["仓库工人", "拣货员", "仓管员"],
        skills: [
            "pick orders",
            "operate forklift",
            "stock control",
            "pack goods",
            "receive deliveries",
            "warehouse safety",
            "inventory counting",
        ],
    },
    Occupation {
        key: "lawyer",
        en: ["lawyer", "attorney", "legal counsel"],
        de: ["Rechtsanwalt", "Jurist", "Syndikus"],
        es: ["abogado", "asesor jurídico", "letrado"],
        zh: ["律师", "法律顾问", "法务"],
        skills: [
            "legal advice",
            "draft contracts",
            "litigation",
            "legal research",
            "court representation",
            "negotiate settlements",
            "compliance review",
        ],
    },
    Occupation {
        key: "plumber",
        en: ["plumber", "pipefitter", "heating installer"],
        de: ["Klempner", "Installateur", "Anlagenmechaniker"],
        es: ["fontanero", "plomero", "instalador sanitario"],
        zh: ["水管工", "管道工", "暖通安装工"],
        skills: [
            "install pipes",
            "repair leaks",
            "plumbing systems",
            "install heating",
            "water supply",
            "drainage systems",
            "solder pipes",
        ],
    },
    Occupation {
        key: "hr",
        en: ["hr manager", "personnel manager", "recruiter"],
        de: ["Personalleiter", "Personalreferent", "Recruiter"],
        es: [
            "gerente de recursos humanos",
            "responsable de personal",
            "reclutador",
        ],
        zh: ["人力资源经理", "人事经理", "招聘专员"],
        skills: [
            "recruitment",
            "conduct interviews",
            "employee relations",
            "performance management",
            "labour law",
            "onboarding",
            "training planning",
        ],
    },
    Occupation {
        key: "cashier",
        en: ["cashier", "checkout operator", "till clerk"],
        de: ["Kassierer", "Kassenkraft", "Kassenmitarbeiter"],
        es: ["cajero", "operador de caja", "dependiente de caja"],
        zh: ["收银员", "收款员", "收银专员"],
        skills: [
            "cash handling",
            "operate cash register",
            "process payments",
            "customer service",
            "count money",
            "issue receipts",
            "price scanning",
        ],
    },
];

const MODIFIERS_EN: [&str; 10] = [
    "senior",
    "junior",
    "lead",
    "assistant",
    "trainee",
    "head",
    "chief",
    "deputy",
    "part-time",
    "remote",
];
const MODIFIERS_DE: [&str; 10] = [
    "Senior",
    "Junior",
    "leitender",
    "Hilfs",
    "Auszubildender",
    "Ober",
    "Haupt",
    "stellvertretender",
    "Teilzeit",
    "Remote",
];
const MODIFIERS_ES: [&str; 10] = [
    "sénior",
    "júnior",
    "líder",
    "asistente",
    "aprendiz",
    "jefe",
    "principal",
    "adjunto",
    "a tiempo parcial",
    "remoto",
];
const MODIFIERS_ZH: [&str; 10] = [
    "高级", "初级", "首席", "助理", "实习", "主管", "总", "副", "兼职", "远程",
];

fn compose(lang: Language, synonym: &str, modifier_idx: usize) -> String {
    match lang {
        Language::En => format!("{} {}", MODIFIERS_EN[modifier_idx], synonym),
        Language::De => format!("{} {}", MODIFIERS_DE[modifier_idx], synonym),
        Language::Es => format!("{} {}", synonym, MODIFIERS_ES[modifier_idx]),
        Language::Zh => format!("{}{}", MODIFIERS_ZH[modifier_idx], synonym),
    }
}

fn synonyms(occ: &Occupation, lang: Language) -> &[&'static str; 3] {
    match lang {
        Language::En => &occ.en,
        Language::De => &occ.de,
        Language::Es => &occ.es,
        Language::Zh => &occ.zh,
    }
}

pub fn skill_id(cluster: usize, k: usize) -> String {
    format!("esco:{}-{}", OCCUPATIONS[cluster].key, k)
}

/// Record id of title `title_idx` of `cluster` in `lang`; non-English ids carry
/// the same `/lang` suffix that translation produces.
pub fn record_id(cluster: usize, title_idx: usize, lang: Language) -> String {
    let base = format!("c{cluster:02}-t{title_idx:02}");
    match lang {
        Language::En => base,
        other => format!("{base}{ID_SEPARATOR}{other}"),
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticTitle {
    pub record: JobAdRecord,
    pub cluster: usize,
    pub held_out: bool,
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub titles: Vec<SyntheticTitle>,
    pub gazetteer: SkillGazetteer,
    pub translations: LookupProvider,
}

impl SyntheticCorpus {
    /// Deterministic in `seed`, which only drives modifier assignment. Every
    /// record carries the full skill set of its occupation.
    pub fn generate(seed: u64) -> Self {
        let mut rng = SplitMix64::new(seed);
        let mut titles = Vec::new();
        let mut translations = LookupProvider::default();
        let mut gazetteer = SkillGazetteer::new();

        for (c, occ) in OCCUPATIONS.iter().enumerate() {
            for (k, label) in occ.skills.iter().enumerate() {
                let id = skill_id(c, k);
                gazetteer.insert(&id, label).expect("static label");
                if k % 2 == 0 {
                    gazetteer
                        .insert(&id, &format!("{label} skills"))
                        .expect("static label");
                }
            }

            let mut modifiers: Vec<usize> = (0..MODIFIERS_EN.len()).collect();
            rng.shuffle(&mut modifiers);
            let skills: BTreeSet<String> = (0..occ.skills.len()).map(|k| skill_id(c, k)).collect();
            for (t, &modifier) in modifiers.iter().enumerate().take(TITLES_PER_CLUSTER) {
                let syn = t % 3;
                let en_title = compose(Language::En, occ.en[syn], modifier);
                for lang in Language::ALL {
                    let title = compose(lang, synonyms(occ, lang)[syn], modifier);
                    if lang != Language::En {
                        translations.insert(&en_title, lang, &title);
                    }
                    titles.push(SyntheticTitle {
                        record: JobAdRecord {
                            id: record_id(c, t, lang),
                            language: lang,
                            title,
                            skills: skills.clone(),
                        },
                        cluster: c,
                        held_out: t >= TRAIN_TITLES_PER_CLUSTER,
                    });
                }
            }
        }
        Self {
            titles,
            gazetteer,
            translations,
        }
    }

    pub fn cluster_count(&self) -> usize {
        OCCUPATIONS.len()
    }

    pub fn train_records(&self) -> Vec<JobAdRecord> {
        self.select(|t| !t.held_out)
    }

    /// English training records only, the input to translation.
    pub fn english_sources(&self) -> Vec<JobAdRecord> {
        self.select(|t| !t.held_out && t.record.language == Language::En)
    }

    pub fn held_out_records(&self) -> Vec<JobAdRecord> {
        self.select(|t| t.held_out)
    }

    fn select(&self, keep: impl Fn(&SyntheticTitle) -> bool) -> Vec<JobAdRecord> {
        self.titles
            .iter()
            .filter(|t| keep(t))
            .map(|t| t.record.clone())
            .collect()
    }

    /// Held-out queries in `query_lang`.
    pub fn queries(&self, query_lang: Language) -> Vec<(String, String)> {
        self.titles
            .iter()
            .filter(|t| t.held_out && t.record.language == query_lang)
            .map(|t| (t.record.id.clone(), t.record.title.clone()))
            .collect()
    }

    /// Training titles in `lang`, the candidate pool for title matching.
    pub fn candidates(&self, lang: Language) -> Vec<(String, String)> {
        self.titles
            .iter()
            .filter(|t| !t.held_out && t.record.language == lang)
            .map(|t| (t.record.id.clone(), t.record.title.clone()))
            .collect()
    }

    /// Title-matching judgments: a candidate is relevant when it belongs to the
    /// query's occupation.
    pub fn title_qrels(&self, query_lang: Language, candidate_lang: Language) -> Qrels {
        let mut by_cluster: BTreeMap<usize, BTreeSet<String>> = BTreeMap::new();
        for t in self
            .titles
            .iter()
            .filter(|t| !t.held_out && t.record.language == candidate_lang)
        {
            by_cluster
                .entry(t.cluster)
                .or_default()
                .insert(t.record.id.clone());
        }
        let queries = self
            .titles
            .iter()
            .filter(|t| t.held_out && t.record.language == query_lang)
            .map(|t| (t.record.id.clone(), by_cluster[&t.cluster].clone()))
            .collect();
        Qrels::new(queries).expect("every cluster has training titles")
    }

    /// Skill-prediction judgments for held-out titles in `lang`: all seven skills
    /// of the occupation.
    pub fn skill_qrels(&self, lang: Language) -> Qrels {
        let queries = self
            .titles
            .iter()
            .filter(|t| t.held_out && t.record.language == lang)
            .map(|t| {
                let skills = (0..OCCUPATIONS[t.cluster].skills.len())
                    .map(|k| skill_id(t.cluster, k))
                    .collect();
                (t.record.id.clone(), skills)
            })
            .collect();
        Qrels::new(queries).expect("every occupation has skills")
    }

    /// Translation lookup rows (`source_title, lang, translation`).
    pub fn translations_tsv(&self) -> String {
        let mut out = String::new();
        for t in self
            .titles
            .iter()
            .filter(|t| !t.held_out && t.record.language == Language::En)
        {
            for lang in [Language::De, Language::Es, Language::Zh] {
                let target = record_id(t.cluster, title_index(&t.record.id), lang);
                let translated = self
                    .titles
                    .iter()
                    .find(|x| x.record.id == target)
                    .expect("every title has all four languages");
                out.push_str(&format!(
                    "{}\t{}\t{}\n",
                    t.record.title, lang, translated.record.title
                ));
            }
        }
        out
    }
}

/// Ranks held-out `query_lang` titles against `candidate_lang` training titles
/// and scores the run.
pub fn title_matching_report(
    params: &ModelParams,
    corpus: &SyntheticCorpus,
    query_lang: Language,
    candidate_lang: Language,
    space: Space,
    ks: &[usize],
) -> Result<MetricReport> {
    let index = build_index(params, &corpus.candidates(candidate_lang), space)?;
    let mut run = Run::default();
    for (qid, text) in corpus.queries(query_lang) {
        let list = rank_titles(params, &qid, &text, &index, None)?;
        run.queries
            .insert(qid, list.entries.into_iter().map(|e| e.id).collect());
    }
    evaluate_run(
        &run,
        &corpus.title_qrels(query_lang, candidate_lang),
        ks,
        None,
    )
}

/// Skill prediction for held-out `lang` titles against the gazetteer.
pub fn skill_prediction_report(
    params: &ModelParams,
    corpus: &SyntheticCorpus,
    lang: Language,
    ks: &[usize],
) -> Result<MetricReport> {
    let index = SkillIndex::build(params, &corpus.gazetteer)?;
    let mut run = Run::default();
    for (qid, text) in corpus.queries(lang) {
        let list = index.rank(params, &qid, &text)?;
        run.queries
            .insert(qid, list.entries.into_iter().map(|e| e.id).collect());
    }
    evaluate_run(&run, &corpus.skill_qrels(lang), ks, None)
}

/// Mean MAP of `permutations` uniformly random rankings of the candidate pool.
pub fn random_ranking_map(
    corpus: &SyntheticCorpus,
    query_lang: Language,
    candidate_lang: Language,
    permutations: usize,
    seed: u64,
) -> Result<f64> {
    let qrels = corpus.title_qrels(query_lang, candidate_lang);
    let pool: Vec<String> = corpus
        .candidates(candidate_lang)
        .into_iter()
        .map(|(id, _)| id)
        .collect();
    let mut rng = SplitMix64::new(seed);
    let mut total = 0.0;
    for _ in 0..permutations {
        let mut run = Run::default();
        for (qid, _) in corpus.queries(query_lang) {
            let mut ranked = pool.clone();
            rng.shuffle(&mut ranked);
            run.queries.insert(qid, ranked);
        }
        total += evaluate_run(&run, &qrels, &[], None)?.mean.map;
    }
    Ok(total / permutations as f64)
}

fn title_index(id: &str) -> usize {
    id.split("-t")
        .nth(1)
        .and_then(|s| s.get(..2))
        .and_then(|s| s.parse().ok())
        .expect("synthetic ids embed the title index")
}
