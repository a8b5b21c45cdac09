class Encryptor {
public byte [ ] encrypt(byte [ ] plaintext, String pwd) {
	byte [ ] salt = {15, -12, 94, 0, 12, 3, -65, 73,-1, -84, -35};
	PBEKeySpec spec = new PBEKeySpec (pwd.toCharArray(), salt, 100);

	SecretKeyFactory skf = SecretKeyFactory.getInstance("PBKDF2WithHmacSHA256");
	byte [ ] keyMaterial = skf.generateSecret(spec).getEncoded();
	SecretKeySpec cipherKey = new SecretKeySpec(keyMaterial, "AES");

	Cipher ciph = Cipher.getInstance("AES/ CBC/ PKCS5Padding");
	ciph.init(Cipher.ENCRYPT_MODE, cipherKey);
	return ciph.doFinal(plaintext);
}
}
