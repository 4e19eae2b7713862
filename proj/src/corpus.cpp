#include "apollo/corpus.hpp"

#include "apollo/error.hpp"
#include "apollo/rng.hpp"

#include <array>
#include <fstream>
#include <sstream>

namespace apollo {

std::vector<int> tokenize(std::string_view text) {
    std::vector<int> ids;
    ids.reserve(text.size());
    for (char ch : text) ids.push_back(static_cast<unsigned char>(ch));
    return ids;
}

std::string detokenize(std::span<const int> ids) {
    std::string out;
    out.reserve(ids.size());
    for (int id : ids) {
        if (id < 0 || id > 255) throw InvalidArgument("token " + std::to_string(id) + " is not a byte");
        out.push_back(static_cast<char>(static_cast<unsigned char>(id)));
    }
    return out;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw IoError("error reading " + path.string());
    return buf.str();
}

TokenCorpus tokenize_corpus(const std::filesystem::path& path, double split) {
    if (!(split > 0.0 && split < 1.0)) throw InvalidArgument("split fraction must lie in (0, 1)");
    const std::string text = read_file(path);
    if (text.empty()) throw IoError("corpus " + path.string() + " is empty");
    std::vector<int> ids = tokenize(text);
    const auto cut = static_cast<std::size_t>(static_cast<double>(ids.size()) * split);
    TokenCorpus corpus;
    corpus.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(cut));
    corpus.val.assign(ids.begin() + static_cast<std::ptrdiff_t>(cut), ids.end());
    return corpus;
}

// ---- synthetic prose ------------------------------------------------------

namespace {

constexpr std::array kNames{"Ada", "Boris", "Clara", "Dmitri", "Elena", "Farid", "Greta", "Hugo",
                            "Ines", "Jonas", "Keiko", "Luca", "Mira", "Nils", "Olga", "Pavel"};
constexpr std::array kNouns{"river", "garden", "engine", "window", "letter", "mountain", "kitchen", "teacher",
                            "market", "bridge", "forest", "station", "doctor", "island", "library", "painter",
                            "village", "lantern", "harbor", "machine", "student", "orchard", "castle", "violin",
                            "farmer", "soldier", "captain", "mirror", "bottle", "winter", "morning", "question"};
constexpr std::array kAdjectives{"old", "quiet", "bright", "narrow", "heavy", "green", "distant", "careful",
                                 "small", "golden", "broken", "gentle", "strange", "empty", "warm", "ancient"};
// base form, third person singular, past
constexpr std::array<std::array<const char*, 3>, 16> kVerbs{{{"see", "sees", "saw"},
                                                            {"find", "finds", "found"},
                                                            {"carry", "carries", "carried"},
                                                            {"watch", "watches", "watched"},
                                                            {"follow", "follows", "followed"},
                                                            {"paint", "paints", "painted"},
                                                            {"build", "builds", "built"},
                                                            {"open", "opens", "opened"},
                                                            {"remember", "remembers", "remembered"},
                                                            {"repair", "repairs", "repaired"},
                                                            {"visit", "visits", "visited"},
                                                            {"leave", "leaves", "left"},
                                                            {"hold", "holds", "held"},
                                                            {"answer", "answers", "answered"},
                                                            {"cross", "crosses", "crossed"},
                                                            {"keep", "keeps", "kept"}}};
constexpr std::array kAdverbs{"slowly", "quickly", "again", "often", "never", "quietly", "early", "together"};
constexpr std::array kPrepositions{"near", "behind", "across", "under", "beyond", "inside", "along", "above"};
constexpr std::array kNumbers{"two", "three", "four", "five", "seven", "ten", "twelve", "many"};
constexpr std::array kSpeech{"said", "asked", "whispered", "replied"};

class ProseWriter {
public:
    explicit ProseWriter(std::uint64_t seed) : rng_(seed, 7) {}

    std::string paragraph() {
        std::string out;
        const auto sentences = 3 + rng_.below(5);
        for (std::uint64_t i = 0; i < sentences; ++i) {
            if (i) out += ' ';
            out += sentence();
        }
        return out + "\n\n";
    }

private:
    template <class Array>
    const char* pick(const Array& words) {
        return words[rng_.below(words.size())];
    }

    bool chance(double p) { return rng_.uniform() < p; }

    std::string noun_phrase(bool& plural) {
        if (chance(0.25)) {
            plural = false;
            return pick(kNames);
        }
        plural = chance(0.3);
        std::string np = plural ? (chance(0.5) ? std::string(pick(kNumbers)) : "the") : (chance(0.6) ? "the" : "a");
        if (chance(0.5)) {
            const char* adj = pick(kAdjectives);
            if (np == "a" && std::string_view("aeiou").find(adj[0]) != std::string_view::npos) np = "an";
            np += ' ';
            np += adj;
        }
        np += ' ';
        np += pick(kNouns);
        if (plural) np += 's';
        return np;
    }

    std::string clause() {
        bool plural = false;
        std::string s = noun_phrase(plural);
        const auto& verb = kVerbs[rng_.below(kVerbs.size())];
        const bool past = chance(0.5);
        if (!past && chance(0.2)) {
            s += plural ? " do not " : " does not ";
            s += verb[0];
        } else {
            s += ' ';
            s += past ? verb[2] : (plural ? verb[0] : verb[1]);
        }
        bool object_plural = false;
        s += ' ' + noun_phrase(object_plural);
        if (chance(0.4)) {
            s += ' ';
            s += pick(kPrepositions);
            s += ' ' + noun_phrase(object_plural);
        }
        if (chance(0.3)) {
            s += ' ';
            s += pick(kAdverbs);
        }
        return s;
    }

    static std::string capitalise(std::string s) {
        if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
        return s;
    }

    std::string sentence() {
        std::string body = clause();
        if (chance(0.3)) body += std::string(chance(0.5) ? ", and " : " because ") + clause();
        if (chance(0.15)) {
            const char* speaker = pick(kNames);
            return "\"" + capitalise(body) + (chance(0.3) ? "?\" " : ",\" ") + pick(kSpeech) + " " + speaker + ".";
        }
        return capitalise(body) + (chance(0.1) ? "!" : ".");
    }

    CounterRng rng_;
};

} // namespace

std::string synthetic_corpus(std::size_t bytes, std::uint64_t seed) {
    ProseWriter writer(seed);
    std::string out;
    out.reserve(bytes + 1024);
    while (out.size() < bytes) out += writer.paragraph();
    out.resize(bytes);
    return out;
}

} // namespace apollo
