#include "lgcm/stemmer.hpp"

#include <array>
#include <cstddef>

namespace lgcm {

namespace {

// Working buffer: the stem is b[0..k]; rules shrink or rewrite the tail.
struct Stem {
    std::string b;
    std::size_t k = 0; // index of the last letter

    bool is_consonant(std::size_t i) const {
        switch (b[i]) {
            case 'a': case 'e': case 'i': case 'o': case 'u': return false;
            case 'y': return i == 0 ? true : !is_consonant(i - 1);
            default: return true;
        }
    }

    // measure: number of VC sequences in [C](VC)^m[V] over b[0..j];
    // j may be -1 for an empty stem (whole-word suffix match)
    int measure(std::ptrdiff_t j) const {
        int n = 0;
        std::ptrdiff_t i = 0;
        while (true) {
            if (i > j) return n;
            if (!is_consonant(i)) break;
            ++i;
        }
        ++i;
        while (true) {
            while (true) {
                if (i > j) return n;
                if (is_consonant(i)) break;
                ++i;
            }
            ++i;
            ++n;
            while (true) {
                if (i > j) return n;
                if (!is_consonant(i)) break;
                ++i;
            }
            ++i;
        }
    }

    bool vowel_in_stem(std::ptrdiff_t j) const {
        for (std::ptrdiff_t i = 0; i <= j; ++i)
            if (!is_consonant(i)) return true;
        return false;
    }

    bool double_consonant(std::ptrdiff_t j) const {
        if (j < 1) return false;
        return b[j] == b[j - 1] && is_consonant(j);
    }

    // consonant-vowel-consonant ending where the final consonant is not w/x/y
    bool cvc(std::ptrdiff_t j) const {
        if (j < 2 || !is_consonant(j) || is_consonant(j - 1) || !is_consonant(j - 2)) return false;
        return b[j] != 'w' && b[j] != 'x' && b[j] != 'y';
    }

    std::ptrdiff_t suffix_j = 0; // index before the matched suffix; -1 = whole word

    bool ends(const char* s) {
        const std::size_t len = std::char_traits<char>::length(s);
        if (len > k + 1) return false;
        if (b.compare(k + 1 - len, len, s) != 0) return false;
        suffix_j = static_cast<std::ptrdiff_t>(k) - static_cast<std::ptrdiff_t>(len);
        return true;
    }

    void set_to(const char* s) {
        const std::size_t len = std::char_traits<char>::length(s);
        const std::size_t start = static_cast<std::size_t>(suffix_j + 1);
        b.replace(start, b.size() - start, s);
        k = start + len - 1;
    }

    void replace_if_m_positive(const char* s) {
        if (measure(suffix_j) > 0) set_to(s);
    }
};

void step1ab(Stem& s) {
    if (s.b[s.k] == 's') {
        if (s.ends("sses")) {
            s.k -= 2;
        } else if (s.ends("ies")) {
            s.set_to("i");
        } else if (s.b[s.k - 1] != 's') {
            --s.k;
        }
    }
    if (s.ends("eed")) {
        if (s.measure(s.suffix_j) > 0) --s.k;
    } else if ((s.ends("ed") || s.ends("ing")) && s.vowel_in_stem(s.suffix_j)) {
        s.k = s.suffix_j;
        if (s.ends("at")) {
            s.set_to("ate");
        } else if (s.ends("bl")) {
            s.set_to("ble");
        } else if (s.ends("iz")) {
            s.set_to("ize");
        } else if (s.double_consonant(s.k)) {
            const char ch = s.b[s.k];
            if (ch != 'l' && ch != 's' && ch != 'z') --s.k;
        } else if (s.measure(s.k) == 1 && s.cvc(s.k)) {
            s.suffix_j = s.k;
            s.set_to("e");
        }
    }
}

void step1c(Stem& s) {
    if (s.ends("y") && s.vowel_in_stem(s.suffix_j)) s.b[s.k] = 'i';
}

void step2(Stem& s) {
    static const std::array<std::pair<const char*, const char*>, 20> rules = {{
        {"ational", "ate"}, {"tional", "tion"}, {"enci", "ence"}, {"anci", "ance"},
        {"izer", "ize"},    {"abli", "able"},   {"alli", "al"},   {"entli", "ent"},
        {"eli", "e"},       {"ousli", "ous"},   {"ization", "ize"}, {"ation", "ate"},
        {"ator", "ate"},    {"alism", "al"},    {"iveness", "ive"}, {"fulness", "ful"},
        {"ousness", "ous"}, {"aliti", "al"},    {"iviti", "ive"},   {"biliti", "ble"},
    }};
    for (const auto& [suf, rep] : rules) {
        if (s.ends(suf)) {
            s.replace_if_m_positive(rep);
            return;
        }
    }
}

void step3(Stem& s) {
    static const std::array<std::pair<const char*, const char*>, 7> rules = {{
        {"icate", "ic"}, {"ative", ""}, {"alize", "al"}, {"iciti", "ic"},
        {"ical", "ic"},  {"ful", ""},   {"ness", ""},
    }};
    for (const auto& [suf, rep] : rules) {
        if (s.ends(suf)) {
            s.replace_if_m_positive(rep);
            return;
        }
    }
}

void step4(Stem& s) {
    static const std::array<const char*, 18> suffixes = {
        "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement",
        "ment", "ent", "ion", "ou", "ism", "ate", "iti", "ous", "ive",
    };
    // "ize" also strips at this stage
    for (const char* suf : suffixes) {
        if (!s.ends(suf)) continue;
        if (std::string(suf) == "ion" &&
            (s.suffix_j < 0 || !(s.b[s.suffix_j] == 's' || s.b[s.suffix_j] == 't')))
            return;
        if (s.measure(s.suffix_j) > 1) s.k = s.suffix_j;
        return;
    }
    if (s.ends("ize") && s.measure(s.suffix_j) > 1) s.k = s.suffix_j;
}

void step5(Stem& s) {
    if (s.b[s.k] == 'e') {
        const int m = s.measure(s.k - 1);
        if (m > 1 || (m == 1 && !s.cvc(s.k - 1))) --s.k;
    }
    if (s.b[s.k] == 'l' && s.double_consonant(s.k) && s.measure(s.k - 1) > 1) --s.k;
}

} // namespace

std::string porter_stem(const std::string& word) {
    if (word.size() <= 2) return word;
    Stem s{word, word.size() - 1};
    step1ab(s);
    step1c(s);
    step2(s);
    step3(s);
    step4(s);
    step5(s);
    return s.b.substr(0, s.k + 1);
}

} // namespace lgcm
