#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ppft/error.hpp"
#include "ppft/rng.hpp"
#include "ppft/text.hpp"
#include "ppft/vocab.hpp"

namespace ppft {

struct CorpusRecord {
  std::string prompt;
  std::string answer;
  // attribute name -> gold values; singletons for age/sex, lists otherwise
  std::map<std::string, std::vector<std::string>> attributes;
};

struct Corpus {
  std::vector<CorpusRecord> records;
  std::size_t size() const { return records.size(); }
};

// JSONL ingestion: one object per line with keys `prompt`, `answer`
// (optional) and `attributes` (optional object of string -> string or
// string -> list-of-strings). Attribute values must occur verbatim in the
// prompt.
inline Corpus load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::ParseError, "load_corpus: cannot open " + path);
  Corpus corpus;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      raise(ErrorCode::ParseError, "line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!obj.is_object()) {
      raise(ErrorCode::ParseError, "line " + std::to_string(lineno) + ": not a JSON object");
    }
    CorpusRecord rec;
    if (!obj.contains("prompt") || !obj["prompt"].is_string() ||
        obj["prompt"].get<std::string>().empty()) {
      raise(ErrorCode::SchemaError,
            "line " + std::to_string(lineno) + ": missing or empty 'prompt'");
    }
    rec.prompt = obj["prompt"].get<std::string>();
    if (obj.contains("answer")) {
      if (!obj["answer"].is_string()) {
        raise(ErrorCode::SchemaError, "line " + std::to_string(lineno) + ": 'answer' not a string");
      }
      rec.answer = obj["answer"].get<std::string>();
    }
    if (obj.contains("attributes")) {
      const auto& attrs = obj["attributes"];
      if (!attrs.is_object()) {
        raise(ErrorCode::SchemaError,
              "line " + std::to_string(lineno) + ": 'attributes' not an object");
      }
      for (auto it = attrs.begin(); it != attrs.end(); ++it) {
        std::vector<std::string> values;
        if (it.value().is_string()) {
          values.push_back(it.value().get<std::string>());
        } else if (it.value().is_array()) {
          for (const auto& v : it.value()) {
            if (!v.is_string()) {
              raise(ErrorCode::SchemaError, "line " + std::to_string(lineno) +
                                                ": attribute '" + it.key() + "' has a non-string item");
            }
            values.push_back(v.get<std::string>());
          }
        } else {
          raise(ErrorCode::SchemaError, "line " + std::to_string(lineno) + ": attribute '" +
                                            it.key() + "' must be string or list of strings");
        }
        for (const auto& v : values) {
          if (rec.prompt.find(v) == std::string::npos) {
            raise(ErrorCode::SchemaError, "line " + std::to_string(lineno) + ": attribute value '" +
                                              v + "' not found in prompt");
          }
        }
        rec.attributes.emplace(it.key(), std::move(values));
      }
    }
    corpus.records.push_back(std::move(rec));
  }
  return corpus;
}

inline void save_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out) raise(ErrorCode::ParseError, "save_corpus: cannot open " + path);
  for (const auto& rec : corpus.records) {
    nlohmann::json obj;
    obj["prompt"] = rec.prompt;
    obj["answer"] = rec.answer;
    if (!rec.attributes.empty()) {
      nlohmann::json attrs = nlohmann::json::object();
      for (const auto& [name, values] : rec.attributes) {
        if (values.size() == 1) {
          attrs[name] = values.front();
        } else {
          attrs[name] = values;
        }
      }
      obj["attributes"] = attrs;
    }
    out << obj.dump() << "\n";
  }
}

struct AttributePools {
  std::vector<std::string> ages;
  std::vector<std::string> sexes;
  std::vector<std::string> antecedents;
  std::vector<std::string> symptoms;
  std::vector<std::string> diagnoses;
};

inline AttributePools default_attribute_pools() {
  AttributePools pools;
  for (int age = 20; age <= 79; ++age) pools.ages.push_back(std::to_string(age));
  pools.sexes = {"male", "female"};
  pools.antecedents = {"chronic pancreatitis",
                       "diabetes",
                       "obesity",
                       "smoking",
                       "hypertension",
                       "asthma",
                       "kidney disease",
                       "heart failure",
                       "anemia",
                       "hormone intake",
                       "recent surgery",
                       "alcohol use",
                       "immobility",
                       "family history of cancer",
                       "arthritis",
                       "hepatitis",
                       "stroke",
                       "thyroid disorder",
                       "ulcers",
                       "migraines",
                       "depression",
                       "gallstones"};
  pools.symptoms = {"cough",
                    "diarrhea",
                    "fatigue",
                    "nausea",
                    "pain",
                    "skin lesions",
                    "weight loss",
                    "fever",
                    "dizziness",
                    "swelling",
                    "muscle spasms",
                    "shortness of breath",
                    "dark urine",
                    "jaw pain",
                    "vomiting",
                    "headache",
                    "rash",
                    "chills",
                    "palpitations",
                    "confusion",
                    "tremor",
                    "insomnia"};
  pools.diagnoses = {"pancreatic cancer", "pulmonary embolism", "acute dystonia",
                     "anaphylaxis",       "tuberculosis",       "myocarditis"};
  return pools;
}

namespace detail {

// n distinct picks, order of selection discarded: items are reported
// alphabetically the way the synthetic prompt template lists them.
inline std::vector<std::string> sample_subset(CounterRng& rng, const std::vector<std::string>& pool,
                                              std::size_t min_n, std::size_t max_n) {
  min_n = std::min(min_n, pool.size());
  max_n = std::min(max_n, pool.size());
  const std::size_t n = min_n + (max_n > min_n ? rng.next_u64() % (max_n - min_n + 1) : 0);
  std::vector<std::size_t> idx(pool.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + rng.next_u64() % (idx.size() - i);
    std::swap(idx[i], idx[j]);
  }
  std::vector<std::string> picked;
  picked.reserve(n);
  for (std::size_t i = 0; i < n; ++i) picked.push_back(pool[idx[i]]);
  std::sort(picked.begin(), picked.end());
  return picked;
}

inline std::string join_comma(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& item : items) {
    if (!out.empty()) out += ", ";
    out += item;
  }
  return out;
}

}  // namespace detail

// One synthetic clinical record following the fixed template
//   "A {age}-year-old {sex} has a history of {antecedents}. The {age}-year-old
//    {sex} presents the symptoms of {symptoms}. What is the likely diagnosis?"
// Deterministic in rng_seed; every annotation value is a substring of the
// prompt by construction.
inline CorpusRecord synth_clinical_prompt(std::uint64_t rng_seed, const AttributePools& pools) {
  if (pools.ages.empty() || pools.sexes.empty() || pools.antecedents.empty() ||
      pools.symptoms.empty() || pools.diagnoses.empty()) {
    raise(ErrorCode::EmptyPool, "synth_clinical_prompt: all attribute pools must be non-empty");
  }
  CounterRng rng(rng_seed, /*stream=*/0x70726f6d70ull);  // "promp"
  const std::string age = pools.ages[rng.next_u64() % pools.ages.size()];
  const std::string sex = pools.sexes[rng.next_u64() % pools.sexes.size()];
  const auto antecedents = detail::sample_subset(rng, pools.antecedents, 3, 5);
  const auto symptoms = detail::sample_subset(rng, pools.symptoms, 3, 5);
  const std::string diagnosis = pools.diagnoses[rng.next_u64() % pools.diagnoses.size()];

  CorpusRecord rec;
  rec.prompt = "A " + age + "-year-old " + sex + " has a history of " +
               detail::join_comma(antecedents) + ". The " + age + "-year-old " + sex +
               " presents the symptoms of " + detail::join_comma(symptoms) +
               ". What is the likely diagnosis?";
  rec.answer = diagnosis;
  rec.attributes["age"] = {age};
  rec.attributes["sex"] = {sex};
  rec.attributes["antecedents"] = antecedents;
  rec.attributes["symptoms"] = symptoms;
  return rec;
}

inline Corpus make_synthetic_corpus(std::size_t n_records, std::uint64_t seed,
                                    const AttributePools& pools = default_attribute_pools()) {
  Corpus corpus;
  corpus.records.reserve(n_records);
  for (std::size_t i = 0; i < n_records; ++i) {
    corpus.records.push_back(synth_clinical_prompt(derive_seed(seed, i), pools));
  }
  return corpus;
}

// Sorted unique normalized tokens of every prompt; the deterministic desk
// vocabulary used by the attack harness and the send pipeline.
inline TokenVocab vocab_from_corpora(std::initializer_list<const Corpus*> corpora, int d_e,
                                     std::uint64_t seed) {
  std::set<std::string> uniq;
  for (const Corpus* c : corpora) {
    for (const auto& rec : c->records) {
      for (auto& tok : normalize_tokens(rec.prompt)) uniq.insert(std::move(tok));
    }
  }
  return build_vocab(std::vector<std::string>(uniq.begin(), uniq.end()), d_e, seed);
}

}  // namespace ppft
