#include "doctest.h"
#include "stem/hash.hpp"
#include "stem/text.hpp"

using namespace stem;

TEST_CASE("normalize_answer folds case, punctuation and unicode dashes") {
  CHECK(text::normalize_answer("Jazz.") == "jazz");
  CHECK(text::normalize_answer("  Greek   Language ") == "greek language");
  // en dash vs hyphen-with-spaces must meet in the middle
  CHECK(text::normalize_answer("Ciampino–G. B. Pastine International Airport") ==
        text::normalize_answer("Ciampino - G. B. Pastine International Airport."));
  CHECK(text::normalize_answer("Leonardo da Vinci – Fiumicino Airport") ==
        text::normalize_answer("Leonardo da Vinci–Fiumicino Airport"));
  CHECK(text::normalize_answer("rome's") == "rome s");
}

TEST_CASE("fuzzy_ratio tolerates punctuation and case differences") {
  CHECK(text::fuzzy_ratio("texarkana arkansas", "Texarkana, Arkansas") >= 0.8);
  CHECK(text::fuzzy_ratio("rome", "Rome") == doctest::Approx(1.0));
  CHECK(text::fuzzy_ratio("abc", "abc") == doctest::Approx(1.0));
  CHECK(text::fuzzy_ratio("", "") == doctest::Approx(1.0));
  CHECK(text::fuzzy_ratio("abc", "xyz") < 0.5);
}

TEST_CASE("edit_distance counts codepoints") {
  CHECK(text::edit_distance("kitten", "sitting") == 3);
  CHECK(text::edit_distance("", "ab") == 2);
  CHECK(text::edit_distance("Tōhoku", "Tohoku") == 1);
}

TEST_CASE("collapse_whitespace and trim") {
  CHECK(text::collapse_whitespace("a\t b\n\nc ") == "a b c");
  CHECK(text::trim("  x  ") == "x");
  CHECK(text::split("a,b,,c", ',').size() == 4);
}

TEST_CASE("sha256 known vectors") {
  CHECK(hash::sha256_hex("") ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(hash::sha256_hex("abc") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  // Two-block message exercises the padding path.
  CHECK(hash::sha256_hex("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq") ==
        "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
}

TEST_CASE("fnv1a64 is stable") {
  CHECK(hash::fnv1a64("") == 14695981039346656037ULL);
  CHECK(hash::fnv1a64("a") == 12638187200555641996ULL);
}
