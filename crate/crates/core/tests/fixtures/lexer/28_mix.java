// file header
package a.b;

import java.util.*;

public class Mix28 {
	String url() {
		return "http://example.org/path // not a comment";
	}
	String block() { return "/* also not a comment */"; }

	@SuppressWarnings({"unchecked", "rawtypes"})
	@Deprecated(since = "1.2", forRemoval = true)
	void legacy() {}

	long numbers() {
		long big = 1_000_000L;
		double h = 0x1.8p1;
		int bin = 0b1010_1010;
		float f = 3.5e-2f;
		return big + (long) h + bin + (long) f;
	}

	double ratio(double a, double b, double c) {
		return a / b / c; // divide twice
	}
}
