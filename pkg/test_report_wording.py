from pathlib import Path
import unittest
from unittest import mock

import capstone_report
from capstone_defaults import DEFAULT_SOURCES


class ReportWordingTest(unittest.TestCase):
    def test_report_presents_values_as_numerical_estimates(self):
        source = Path(__file__).with_name("capstone_report.py").read_text(encoding="utf-8")

        self.assertIn("Numerical estimate", source)
        self.assertIn("none of it is a proof", source)
        self.assertNotIn("proves that", source)

    def test_safe_text_strips_unencodable_symbols(self):
        text = capstone_report.safe_text("B ∪ X_1, ε = 0.01, τ ≥ 0")
        self.assertEqual(text, "B u X_1, eps = 0.01, tau >= 0")
        text.encode("latin-1")

    def test_pdf_states_the_basis_of_the_defaults(self):
        report = {"config": {"command": "capacity"}, "results": {}, "diagnostics": {}, "warnings": []}
        with mock.patch.object(capstone_report.FPDF, "multi_cell", autospec=True) as multi_cell:
            capstone_report.create_pdf(report)
        written = [call.kwargs.get("txt") for call in multi_cell.call_args_list]
        for basis in DEFAULT_SOURCES.values():
            self.assertIn(capstone_report.safe_text(basis), written)


if __name__ == "__main__":
    unittest.main()
