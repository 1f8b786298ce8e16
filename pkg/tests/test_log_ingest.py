"""Unit tests for access-log parsing and cleaning."""

from __future__ import annotations

import pytest

from usage_profiles.exceptions import LogParseError
from usage_profiles.log_ingest import (
    AliasState,
    CleanPolicy,
    CleanStats,
    DropReason,
    LogRecord,
    UrlMap,
    anonymize_and_map,
    clean_log,
    clean_record,
    parse_log_line,
    read_log,
)

SAMPLE_LINE = (
    "1212265085.247 741 192.168.23.62 TCP_MISS/200 10858 GET "
    "http://www.pace.edu.in/index.php - DEFAULT_PARENT/192.168.20.1 Mozilla/5.0"
)


def _record(url="http://host/index.php", agent="Mozilla/5.0", status=200, ip="10.0.0.1", ts=1.0):
    return LogRecord(
        timestamp=ts,
        elapsed_ms=10,
        client_ip=ip,
        result_tag="TCP_MISS",
        status_code=status,
        bytes=100,
        method="GET",
        url=url,
        user_agent=agent,
    )


class TestParseLogLine:
    def test_sample_line(self):
        rec = parse_log_line(SAMPLE_LINE)
        assert rec.timestamp == 1212265085.247
        assert rec.elapsed_ms == 741
        assert rec.client_ip == "192.168.23.62"
        assert rec.result_tag == "TCP_MISS"
        assert rec.status_code == 200
        assert rec.bytes == 10858
        assert rec.method == "GET"
        assert rec.url == "http://www.pace.edu.in/index.php"
        assert rec.ident == "-"
        assert rec.hierarchy == "DEFAULT_PARENT/192.168.20.1"
        assert rec.user_agent == "Mozilla/5.0"

    def test_empty_line(self):
        with pytest.raises(LogParseError) as exc_info:
            parse_log_line("   ", line_no=7)
        assert exc_info.value.reason == "empty"
        assert exc_info.value.line_no == 7
        assert "line 7" in str(exc_info.value)

    def test_four_fields(self):
        with pytest.raises(LogParseError) as exc_info:
            parse_log_line("1212265085.247 741 192.168.23.62 TCP_MISS/200")
        assert exc_info.value.reason == "field count"

    @pytest.mark.parametrize(
        "line,reason",
        [
            (SAMPLE_LINE.replace("1212265085.247", "yesterday"), "timestamp"),
            (SAMPLE_LINE.replace(" 741 ", " -3 "), "elapsed"),
            (SAMPLE_LINE.replace("TCP_MISS/200", "TCP_MISS"), "status"),
            (SAMPLE_LINE.replace(" 10858 ", " lots "), "bytes"),
        ],
    )
    def test_bad_field(self, line, reason):
        with pytest.raises(LogParseError) as exc_info:
            parse_log_line(line)
        assert exc_info.value.reason == reason

    @pytest.mark.parametrize(
        "line,reason",
        [
            (SAMPLE_LINE.replace(" 741 ", " 7² "), "elapsed"),
            (SAMPLE_LINE.replace("TCP_MISS/200", "TCP_MISS/2²"), "status"),
            (SAMPLE_LINE.replace(" 10858 ", " ١٢ "), "bytes"),
        ],
    )
    def test_non_ascii_digits(self, line, reason):
        with pytest.raises(LogParseError) as exc_info:
            parse_log_line(line)
        assert exc_info.value.reason == reason

    @pytest.mark.parametrize("stamp", ["inf", "nan", "1e20", "0"])
    def test_unrepresentable_timestamp(self, stamp):
        with pytest.raises(LogParseError) as exc_info:
            parse_log_line(SAMPLE_LINE.replace("1212265085.247", stamp))
        assert exc_info.value.reason == "timestamp"

    def test_unterminated_quote_keeps_agent_whole(self):
        rec = parse_log_line(SAMPLE_LINE.replace("Mozilla/5.0", '"Mozilla/5.0 (X11'))
        assert rec.user_agent == '"Mozilla/5.0 (X11'
        assert rec.content_type == "-"

    def test_unquoted_agent_takes_rest_of_line(self):
        rec = parse_log_line(SAMPLE_LINE.replace("Mozilla/5.0", "Mozilla/5.0 (X11; Linux)"))
        assert rec.user_agent == "Mozilla/5.0 (X11; Linux)"
        assert rec.content_type == "-"

    def test_quoted_agent_then_content_type(self):
        line = SAMPLE_LINE.replace("Mozilla/5.0", '"Mozilla/5.0 (X11; Linux)" text/html')
        rec = parse_log_line(line)
        assert rec.user_agent == "Mozilla/5.0 (X11; Linux)"
        assert rec.content_type == "text/html"

    def test_to_line_parses_back(self):
        rec = _record(agent="Mozilla/4.0 (compatible; MSIE 8.0)", ts=1212265085.247)
        assert parse_log_line(rec.to_line()) == rec


class TestCleanRecord:
    def test_gif_dropped(self):
        verdict = clean_record(_record(url="http://host/img/logo.gif"), CleanPolicy())
        assert not verdict.kept
        assert verdict.reason is DropReason.SUFFIX

    def test_suffix_match_is_case_sensitive(self):
        policy = CleanPolicy(irrelevant_suffixes=frozenset({"gif"}))
        assert clean_record(_record(url="http://host/logo.GIF"), policy).kept

    def test_suffix_only_from_last_path_segment(self):
        verdict = clean_record(_record(url="http://host/img.gif/page.php"), CleanPolicy())
        assert verdict.kept

    def test_robot_agent_case_insensitive(self):
        agent = "Mozilla/5.0 (compatible; Googlebot/2.1; +http://www.google.com/bot.html)"
        verdict = clean_record(_record(agent=agent), CleanPolicy(robot_agents=frozenset({"GoogleBot"})))
        assert verdict.reason is DropReason.ROBOT

    def test_robots_txt_dropped(self):
        verdict = clean_record(_record(url="http://host/robots.txt"), CleanPolicy())
        assert verdict.reason is DropReason.ROBOT

    def test_query_string_stripped(self):
        verdict = clean_record(_record(url="http://host/index.php?x=1"), CleanPolicy())
        assert verdict.kept
        assert verdict.record.url == "http://host/index.php"

    def test_fragment_stripped(self):
        verdict = clean_record(_record(url="http://host/faculty.php#top"), CleanPolicy())
        assert verdict.record.url == "http://host/faculty.php"

    def test_query_kept_when_disabled(self):
        verdict = clean_record(_record(url="http://host/index.php?x=1"), CleanPolicy(strip_query=False))
        assert verdict.record.url == "http://host/index.php?x=1"

    def test_suffix_checked_after_query_strip(self):
        verdict = clean_record(_record(url="http://host/logo.gif?v=2"), CleanPolicy())
        assert verdict.reason is DropReason.SUFFIX

    def test_status_filter(self):
        policy = CleanPolicy(status_filter=frozenset({200}))
        assert clean_record(_record(status=200), policy).kept
        assert clean_record(_record(status=404), policy).reason is DropReason.STATUS

    def test_no_status_filter_by_default(self):
        assert clean_record(_record(status=500), CleanPolicy()).kept


class TestCleanPolicyFromFiles:
    def test_defaults(self):
        policy = CleanPolicy.from_files()
        assert {"gif", "jpeg", "GIF", "JPEG", "jpg", "JPG", "map"} <= policy.irrelevant_suffixes
        assert "googlebot" in policy.robot_agents
        assert policy.status_filter is None

    def test_list_files(self, tmp_path):
        suffixes = tmp_path / "suffixes.txt"
        suffixes.write_text("# static files\n.gif\npdf\n\n", encoding="utf-8")
        robots = tmp_path / "robots.txt"
        robots.write_text("MyCrawler  # internal\n", encoding="utf-8")

        policy = CleanPolicy.from_files(str(suffixes), str(robots), keep_status=[200, 304])
        assert policy.irrelevant_suffixes == frozenset({"gif", "pdf"})
        assert policy.robot_agents == frozenset({"mycrawler"})
        assert policy.status_filter == frozenset({200, 304})


class TestAnonymizeAndMap:
    def test_first_seen_aliases(self):
        state = AliasState()
        first = anonymize_and_map(_record(ip="192.168.23.62"), state)
        again = anonymize_and_map(_record(ip="192.168.23.62", url="http://host/b.php"), state)
        other = anonymize_and_map(_record(ip="192.168.23.70", agent="Opera/9.80"), state)

        assert first.ip_alias == "IP1"
        assert again.ip_alias == "IP1"
        assert other.ip_alias == "IP2"
        assert (first.ua_alias, other.ua_alias) == ("UA1", "UA2")
        assert (first.url_id, again.url_id, other.url_id) == (1, 2, 1)
        assert other.user_key == ("IP2", "UA2")


class TestUrlMap:
    def test_dense_first_seen_ids(self):
        url_map = UrlMap()
        assert url_map.intern("/a") == 1
        assert url_map.intern("/b") == 2
        assert url_map.intern("/a") == 1
        assert len(url_map) == 2
        assert url_map.url_of(2) == "/b"
        assert url_map.id_of("/b") == 2
        assert list(url_map.items()) == [(1, "/a"), (2, "/b")]
        assert 2 in url_map
        assert 3 not in url_map

    def test_unknown_id(self):
        with pytest.raises(KeyError):
            UrlMap().url_of(0)


class TestCleanLog:
    def test_fixture_hand_count(self, sample_log):
        cleaned, url_map, stats = clean_log(read_log(sample_log))
        assert stats == CleanStats(
            input_lines=20,
            parse_errors=1,
            dropped_suffix=6,
            dropped_robot=3,
            dropped_status=0,
            kept=10,
        )
        assert stats.consistent
        assert len(cleaned) == 10

    def test_dirty_lines_are_counted_not_fatal(self):
        lines = [
            SAMPLE_LINE,
            SAMPLE_LINE.replace(" 741 ", " 7² "),
            SAMPLE_LINE.replace("1212265085.247", "1e20"),
        ]
        cleaned, _, stats = clean_log(lines)
        assert stats.parse_errors == 2
        assert stats.kept == len(cleaned) == 1

    def test_fixture_aliases_and_urls(self, sample_log):
        cleaned, url_map, _ = clean_log(read_log(sample_log))
        assert [url_map.url_of(i) for i in range(1, len(url_map) + 1)] == [
            "http://www.pace.edu.in/index.php",
            "http://www.pace.edu.in/admission.php",
            "http://www.pace.edu.in/courses.php",
            "http://www.pace.edu.in/contact.php",
            "http://www.pace.edu.in/faculty.php",
        ]
        assert {r.ip_alias for r in cleaned} == {"IP1", "IP2"}
        assert cleaned[0].user_key == ("IP1", "UA1")
        assert cleaned[2].user_key == ("IP2", "UA2")

    def test_output_sorted_by_time(self):
        lines = [
            _record(url="http://host/b.php", ts=20.0).to_line(),
            _record(url="http://host/a.php", ts=10.0).to_line(),
            _record(url="http://host/c.php", ts=20.0).to_line(),
        ]
        cleaned, url_map, _ = clean_log(lines)
        assert [r.timestamp for r in cleaned] == [10.0, 20.0, 20.0]
        # Stable on ties; ids follow time order.
        assert [url_map.url_of(r.url_id) for r in cleaned] == [
            "http://host/a.php",
            "http://host/b.php",
            "http://host/c.php",
        ]

    def test_robots_txt_requester_dropped_entirely(self):
        crawler = "Java/1.6.0_17"
        lines = [
            _record(url="http://host/robots.txt", agent=crawler, ip="172.16.0.9", ts=1.0).to_line(),
            _record(url="http://host/a.php", agent=crawler, ip="172.16.0.9", ts=2.0).to_line(),
            _record(url="http://host/b.php", agent=crawler, ip="172.16.0.9", ts=3.0).to_line(),
            _record(url="http://host/a.php", ts=4.0).to_line(),
        ]
        cleaned, _, stats = clean_log(lines)
        assert stats.dropped_robot == 3
        assert stats.kept == 1
        assert stats.consistent
        assert len(cleaned) == 1

    def test_empty_input(self):
        cleaned, url_map, stats = clean_log([])
        assert cleaned == []
        assert len(url_map) == 0
        assert stats == CleanStats()

    def test_recleaning_kept_lines_drops_nothing(self, sample_log):
        policy = CleanPolicy()
        kept_lines = []
        for line in read_log(sample_log):
            try:
                verdict = clean_record(parse_log_line(line), policy)
            except LogParseError:
                continue
            if verdict.kept:
                kept_lines.append(verdict.record.to_line())

        cleaned, _, stats = clean_log(kept_lines, policy)
        assert stats.kept == stats.input_lines == 10
        assert len(cleaned) == 10

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            read_log(tmp_path / "nope.log")
